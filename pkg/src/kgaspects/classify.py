"""Binary relation classifiers with likelihood output.

Two kinds are implemented in numpy: logistic regression and a one hidden
layer perceptron (tanh hidden units, sigmoid output).  Both minimise mean
binary cross-entropy by mini-batch SGD.

Any object exposing ``predict_proba(X) -> P(class 1)`` can stand in for a
:class:`ClassifierModel` wherever predictions are made.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateLabelsError, DimensionMismatchError, InputError

KINDS = ("logistic", "mlp")
FORMAT = "kgaspects-classifier"
FORMAT_VERSION = 1


@dataclass
class ClassifierConfig:
    hidden: int = 64
    learning_rate: float = 0.1
    epochs: int = 100
    batch_size: int = 32
    l2: float = 0.0

    def validate(self) -> "ClassifierConfig":
        if self.hidden < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ConfigError(f"invalid classifier config {self}")
        if not self.learning_rate > 0 or self.l2 < 0:
            raise ConfigError(f"invalid classifier config {self}")
        return self


@dataclass(frozen=True)
class Prediction:
    predicted_class: int
    likelihood: float

    def to_dict(self) -> dict:
        return {"class": self.predicted_class, "likelihood": self.likelihood}


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


@dataclass
class ClassifierModel:
    kind: str
    input_dim: int
    params: dict[str, np.ndarray]
    seed: int = 0
    config: ClassifierConfig = field(default_factory=ClassifierConfig)
    loss_history: list[float] = field(default_factory=list)

    def logits(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.input_dim:
            raise DimensionMismatchError(f"expected {self.input_dim} features, got {X.shape[1]}")
        return _forward(self.kind, self.params, X)[0]

    def predict_proba(self, X) -> np.ndarray:
        """Probability of class 1 for each row of ``X``."""
        return sigmoid(self.logits(X))

    def checksum(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.params):
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.params[name]).tobytes())
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "kind": self.kind,
            "input_dim": self.input_dim,
            "seed": self.seed,
            "config": asdict(self.config),
            "params": {k: {"shape": list(v.shape), "values": [float(x) for x in v.ravel()]}
                       for k, v in sorted(self.params.items())},
            "loss_history": self.loss_history,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ClassifierModel":
        if data.get("format") != FORMAT or data.get("version") != FORMAT_VERSION:
            raise InputError(f"not a {FORMAT} v{FORMAT_VERSION} file")
        params = {k: np.asarray(v["values"], dtype=np.float64).reshape(v["shape"])
                  for k, v in data["params"].items()}
        return cls(data["kind"], data["input_dim"], params, data["seed"],
                   ClassifierConfig(**data["config"]), data.get("loss_history", []))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ClassifierModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _forward(kind, params, X):
    if kind == "logistic":
        return X @ params["w"] + params["b"][0], None
    if kind == "mlp":
        hidden = np.tanh(X @ params["W1"] + params["b1"])
        return hidden @ params["w2"] + params["b2"][0], hidden
    raise ConfigError(f"unknown classifier kind {kind!r}")


def loss_and_grads(kind: str, params: dict, X, y, l2: float = 0.0):
    """Mean binary cross-entropy of ``params`` on ``(X, y)`` and its gradients."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z, hidden = _forward(kind, params, X)
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    dz = (sigmoid(z) - y) / len(y)
    if kind == "logistic":
        grads = {"w": X.T @ dz, "b": np.array([dz.sum()])}
    else:
        dh = np.outer(dz, params["w2"]) * (1.0 - hidden ** 2)
        grads = {"W1": X.T @ dh, "b1": dh.sum(axis=0), "w2": hidden.T @ dz, "b2": np.array([dz.sum()])}
    if l2:
        for name in ("w", "W1", "w2"):
            if name in params:
                loss += 0.5 * l2 * float(np.sum(params[name] ** 2))
                grads[name] = grads[name] + l2 * params[name]
    return loss, grads


def init_params(kind: str, input_dim: int, hidden: int, rng: np.random.Generator) -> dict:
    """Output layer starts at zero, so an untrained model predicts 0.5 everywhere."""
    if kind == "logistic":
        return {"w": np.zeros(input_dim), "b": np.zeros(1)}
    if kind == "mlp":
        bound = np.sqrt(6.0 / (input_dim + hidden))
        return {"W1": rng.uniform(-bound, bound, size=(input_dim, hidden)),
                "b1": np.zeros(hidden), "w2": np.zeros(hidden), "b2": np.zeros(1)}
    raise ConfigError(f"unknown classifier kind {kind!r}; choose from {KINDS}")


def train_classifier(X, y, kind: str = "mlp", config: ClassifierConfig | None = None,
                     seed: int = 0) -> ClassifierModel:
    config = (config or ClassifierConfig()).validate()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise InputError(f"X has shape {X.shape} but y has {len(y)} labels")
    if len(y) < 2:
        raise InputError("need at least two training examples")
    if not np.all(np.isfinite(X)):
        raise InputError("X contains NaN or infinite values")
    if not set(np.unique(y).tolist()) <= {0, 1}:
        raise InputError("labels must be 0 or 1")
    if len(np.unique(y)) < 2:
        raise DegenerateLabelsError("training labels contain a single class")

    rng = np.random.default_rng(seed)
    params = init_params(kind, X.shape[1], config.hidden, rng)
    yf = y.astype(np.float64)
    history = []
    for _ in range(config.epochs):
        order = rng.permutation(len(X))
        total = 0.0
        for start in range(0, len(X), config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = loss_and_grads(kind, params, X[idx], yf[idx], config.l2)
            total += loss * len(idx)
            for name, g in grads.items():
                params[name] -= config.learning_rate * g
        history.append(total / len(X))
    return ClassifierModel(kind, X.shape[1], params, seed, config, history)


def prediction_from_proba(p: float) -> Prediction:
    """Class 1 iff ``p >= 0.5``; likelihood is the probability of that class."""
    p = float(p)
    return Prediction(1, p) if p >= 0.5 else Prediction(0, 1.0 - p)


def predict(model, x) -> Prediction:
    x = np.asarray(x, dtype=np.float64)
    dim = getattr(model, "input_dim", None)
    if x.ndim != 1 or (dim is not None and len(x) != dim):
        raise InputError(f"expected a vector of length {dim}, got shape {x.shape}")
    return prediction_from_proba(np.asarray(model.predict_proba(x[None, :])).ravel()[0])


def predict_many(model, X) -> list[Prediction]:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return [prediction_from_proba(p) for p in np.asarray(model.predict_proba(X)).ravel()]

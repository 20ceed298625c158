"""Fully connected softmax classifier trained by backpropagation, plus a
nearest-centroid baseline."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .qd import Dataset

HIDDEN = (128, 64, 32)


class ClassifyError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z):
    return (z > 0).astype(z.dtype)


def _tanh_grad(z):
    return 1.0 - np.tanh(z) ** 2


ACTIVATIONS = {"relu": (_relu, _relu_grad), "tanh": (np.tanh, _tanh_grad)}


@dataclass(eq=False)
class MLPModel:
    layer_sizes: list[int]
    weights: list[np.ndarray]  # weights[k] has shape (layer_sizes[k], layer_sizes[k+1])
    biases: list[np.ndarray]
    activation: str = "relu"
    seed: int | None = None

    def __post_init__(self):
        sizes = [int(s) for s in self.layer_sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise ClassifyError("need at least input and output layers")
        if self.activation not in ACTIVATIONS:
            raise ClassifyError(f"unknown activation {self.activation!r}")
        self.weights = [np.asarray(W, dtype=float) for W in self.weights]
        self.biases = [np.asarray(b, dtype=float) for b in self.biases]
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ClassifyError("one weight matrix and bias per layer transition")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (sizes[k], sizes[k + 1]) or b.shape != (sizes[k + 1],):
                raise ClassifyError(f"layer {k} parameter shapes do not chain")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ClassifyError(f"layer {k} has non-finite parameters")
        self.layer_sizes = sizes

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "MLPModel":
        return MLPModel(list(self.layer_sizes), [W.copy() for W in self.weights],
                        [b.copy() for b in self.biases], self.activation, self.seed)

    def to_dict(self) -> dict:
        return {"layer_sizes": self.layer_sizes, "activation": self.activation,
                "weights": [W.tolist() for W in self.weights],
                "biases": [b.tolist() for b in self.biases], "seed": self.seed}

    @classmethod
    def from_dict(cls, data: dict) -> "MLPModel":
        try:
            return cls(list(data["layer_sizes"]), data["weights"], data["biases"],
                       data.get("activation", "relu"), data.get("seed"))
        except KeyError as exc:
            raise ClassifyError(f"model record lacks {exc}") from None


def init_model(layer_sizes, seed: int, activation: str = "relu") -> MLPModel:
    """He-style uniform initialisation: U(-sqrt(6/fan_in), +sqrt(6/fan_in))."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    Ws, bs = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        lim = math.sqrt(6.0 / fan_in)
        Ws.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return MLPModel(list(layer_sizes), Ws, bs, activation, seed)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_input(m: MLPModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != m.layer_sizes[0]:
        raise ClassifyError(f"expected {m.layer_sizes[0]} features, got {X.shape[-1]}")
    return X


def logits(m: MLPModel, X) -> np.ndarray:
    act = ACTIVATIONS[m.activation][0]
    h = _check_input(m, X)
    for k, (W, b) in enumerate(zip(m.weights, m.biases)):
        h = h @ W + b
        if k < len(m.weights) - 1:
            h = act(h)
    return h


def forward(m: MLPModel, X) -> np.ndarray:
    """Class probabilities for one feature vector or a batch of rows."""
    return softmax(logits(m, X))


def predict(m: MLPModel, X) -> np.ndarray:
    return np.argmax(logits(m, X), axis=-1)


def loss_and_grads(m: MLPModel, X: np.ndarray, y: np.ndarray
                   ) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy over the batch and its gradients by backpropagation."""
    act, dact = ACTIVATIONS[m.activation]
    X = _check_input(m, X)
    hs, zs = [X], []
    h = X
    L = len(m.weights)
    for k, (W, b) in enumerate(zip(m.weights, m.biases)):
        z = h @ W + b
        zs.append(z)
        h = act(z) if k < L - 1 else z
        hs.append(h)
    z = zs[-1] - zs[-1].max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = X.shape[0]
    loss = -float(logp[np.arange(n), y].mean())
    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    gW, gb = [None] * L, [None] * L
    for k in range(L - 1, -1, -1):
        gW[k] = hs[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ m.weights[k].T) * dact(zs[k - 1])
    return loss, gW, gb


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    train_fraction: float = 0.8
    hidden: tuple[int, ...] = HIDDEN
    activation: str = "relu"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ClassifyError("epochs, batch size and learning rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ClassifyError("momentum must lie in [0, 1)")
        if not 0.0 < self.train_fraction < 1.0:
            raise ClassifyError("train fraction must lie in (0, 1)")
        if self.activation not in ACTIVATIONS:
            raise ClassifyError(f"unknown activation {self.activation!r}")

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "batch_size": self.batch_size,
                "learning_rate": self.learning_rate, "momentum": self.momentum,
                "seed": self.seed, "train_fraction": self.train_fraction,
                "hidden": list(self.hidden), "activation": self.activation}


@dataclass(eq=False)
class TrainResult:
    model: MLPModel
    loss_trace: list[float]


def stratified_split(labels: np.ndarray, fraction: float, seed: int
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split; returns sorted train and test indices."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    tr, te = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        k = int(round(fraction * idx.size))
        tr.append(idx[:k])
        te.append(idx[k:])
    return np.sort(np.concatenate(tr)), np.sort(np.concatenate(te))


def train(data: Dataset, cfg: TrainConfig) -> TrainResult:
    """Mini-batch gradient descent with momentum on the whole of ``data``.

    Batch membership comes from a seeded permutation of sample indices each
    epoch, so the result is a pure function of ``(data, cfg)``.
    """
    X, y = data.features, data.labels
    if len(y) == 0:
        raise ClassifyError("empty training set")
    sizes = [X.shape[1], *cfg.hidden, len(data.classes)]
    m = init_model(sizes, cfg.seed, cfg.activation)
    params = m.parameters()
    vel = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    trace = []
    n = len(y)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, cfg.batch_size):
            b = order[s:s + cfg.batch_size]
            loss, gW, gb = loss_and_grads(m, X[b], y[b])
            total += loss * b.size
            grads = [g for pair in zip(gW, gb) for g in pair]
            for p, v, g in zip(params, vel, grads):
                v *= cfg.momentum
                v -= cfg.learning_rate * g
                p += v
        trace.append(total / n)
        if not math.isfinite(trace[-1]):
            raise TrainingError(f"loss diverged at epoch {epoch}: trace tail "
                                f"{trace[-5:]}, learning rate {cfg.learning_rate}")
    return TrainResult(m, trace)


@dataclass
class EvalReport:
    accuracy: float
    confusion: list[list[int]]  # rows: true class, columns: predicted
    classes: list[str]
    run_count: int = 1
    mean: float | None = None
    std: float | None = None
    accuracies: list[float] = field(default_factory=list)
    baseline_accuracies: list[float] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"accuracy": self.accuracy, "confusion": self.confusion,
               "classes": self.classes, "run_count": self.run_count}
        if self.mean is not None:
            out.update(mean=self.mean, std=self.std, accuracies=self.accuracies,
                       baseline_accuracies=self.baseline_accuracies)
        if self.meta:
            out["meta"] = self.meta
        return out


def _report(pred: np.ndarray, y: np.ndarray, classes: list[str]) -> EvalReport:
    k = len(classes)
    conf = np.zeros((k, k), dtype=int)
    np.add.at(conf, (y, pred), 1)
    acc = float(np.mean(pred == y)) if y.size else float("nan")
    return EvalReport(acc, conf.tolist(), list(classes))


def evaluate(m: MLPModel, data: Dataset) -> EvalReport:
    if m.n_classes != len(data.classes):
        raise ClassifyError("model and dataset disagree on the number of classes")
    return _report(predict(m, data.features), data.labels, data.classes)


def nearest_centroid(train_data: Dataset, test_data: Dataset) -> EvalReport:
    """Assign each test row to the class whose training mean is closest."""
    k = len(train_data.classes)
    C = np.full((k, train_data.features.shape[1]), np.inf)
    for c in range(k):
        rows = train_data.features[train_data.labels == c]
        if len(rows):
            C[c] = rows.mean(axis=0)
    present = np.all(np.isfinite(C), axis=1)
    if not present.any():
        raise ClassifyError("no class has training samples")
    X = test_data.features
    d2 = ((X[:, None, :] - C[None, present, :]) ** 2).sum(axis=2)
    pred = np.flatnonzero(present)[np.argmin(d2, axis=1)]
    return _report(pred, test_data.labels, test_data.classes)


def derived_seed(seed: int, run: int) -> int:
    return int(np.random.SeedSequence([seed, run]).generate_state(1, dtype=np.uint32)[0])


def _one_run(args) -> tuple[float, float, list[list[int]]]:
    data, cfg, run_seed = args
    tr, te = stratified_split(data.labels, cfg.train_fraction, run_seed)
    cfg = TrainConfig(**{**cfg.__dict__, "seed": run_seed})
    model = train(data.subset(tr), cfg).model
    rep = evaluate(model, data.subset(te))
    base = nearest_centroid(data.subset(tr), data.subset(te))
    return rep.accuracy, base.accuracy, rep.confusion


def repeat_runs(k: int, data: Dataset, cfg: TrainConfig, seed: int,
                workers: int = 1) -> EvalReport:
    """Train and test ``k`` times on fresh stratified splits.

    Run ``i`` uses seed ``derived_seed(seed, i)`` for both its split and its
    training, and is scored alongside the nearest-centroid baseline on the
    same split. The confusion matrix is summed over runs.
    """
    if k < 1:
        raise ClassifyError("need at least one run")
    jobs = [(data, cfg, derived_seed(seed, i)) for i in range(k)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_one_run, jobs))
    else:
        results = [_one_run(j) for j in jobs]
    accs = [r[0] for r in results]
    conf = np.sum([np.array(r[2]) for r in results], axis=0)
    return EvalReport(float(np.mean(accs)), conf.tolist(), list(data.classes), k,
                      float(np.mean(accs)), float(np.std(accs)), accs,
                      [r[1] for r in results],
                      {"seed": seed, "config": cfg.to_dict(), "noise": data.noise,
                       "M": data.M, "samples": len(data)})


def _extended_loss(m: MLPModel, X: np.ndarray, y: np.ndarray) -> np.longdouble:
    """Mean cross-entropy evaluated in extended precision."""
    act = ACTIVATIONS[m.activation][0]
    h = X.astype(np.longdouble)
    L = len(m.weights)
    for k, (W, b) in enumerate(zip(m.weights, m.biases)):
        h = h @ W.astype(np.longdouble) + b.astype(np.longdouble)
        if k < L - 1:
            h = act(h)
    z = h - h.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return -logp[np.arange(len(y)), y].mean()


def gradient_check(m: MLPModel, X: np.ndarray, y: np.ndarray, probes: int, seed: int,
                   batch: int = 8, step: float = 1e-6, floor: float = 1e-8
                   ) -> list[float]:
    """Relative errors between backprop and central differences.

    Each probe draws a random batch and a random scalar parameter (any
    layer, weight or bias). The relative error is
    ``|g - g_fd| / max(|g|, |g_fd|, floor)``. The difference quotient is
    taken on losses evaluated in extended precision, otherwise cancellation
    swamps gradients much smaller than the loss.
    """
    rng = np.random.default_rng(seed)
    params = m.parameters()
    errs = []
    for _ in range(probes):
        b = rng.choice(len(y), size=min(batch, len(y)), replace=False)
        k = int(rng.integers(len(params)))
        i = tuple(int(rng.integers(s)) for s in params[k].shape)
        Xb, yb = _check_input(m, X[b]), y[b]
        _, gW, gb = loss_and_grads(m, Xb, yb)
        g = [x for pair in zip(gW, gb) for x in pair][k][i]
        old = params[k][i]
        params[k][i] = old + step
        up, hi = _extended_loss(m, Xb, yb), params[k][i]
        params[k][i] = old - step
        down, lo = _extended_loss(m, Xb, yb), params[k][i]
        params[k][i] = old
        # the stored step after float64 rounding
        fd = float((up - down) / (np.longdouble(hi) - np.longdouble(lo)))
        errs.append(abs(g - fd) / max(abs(g), abs(fd), floor))
    return errs

"""Small numpy classifiers with hand-written gradients.

* `BiGRUClassifier` - bidirectional GRU over the (strided) raw beat, final
  states of both directions concatenated, two ReLU dense layers, softmax.
* `MLPClassifier` - ReLU MLP over the flattened, downsampled GAF image.
* `SoftmaxRegression` - linear softmax head (feature-level fusion baseline).

Every model keeps its tensors in ``model.params`` (float64) and exposes
``forward(X) -> (probs, cache)`` and ``backward(cache, y) -> grads`` for the
mean cross-entropy over the batch. `train` runs mini-batch Adam with early
stopping.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyDataset, NumericError, ShapeMismatch

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # stable for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def cross_entropy(probs: np.ndarray, y: np.ndarray) -> float:
    p = probs[np.arange(len(y)), y]
    return float(-np.mean(np.log(np.maximum(p, 1e-300))))


def _softmax_ce_grad(probs: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = probs.copy()
    d[np.arange(len(y)), y] -= 1.0
    return d / len(y)


def _he_uniform(rng, fan_in, fan_out):
    lim = np.sqrt(6.0 / fan_in)
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def _glorot_uniform(rng, fan_in, fan_out):
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


class Classifier:
    kind = "base"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}

    # subclasses fill these in
    def descriptor(self) -> dict:
        raise NotImplementedError

    def forward(self, X: np.ndarray):
        raise NotImplementedError

    def backward(self, cache, y: np.ndarray) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def features(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def loss(self, X: np.ndarray, y: np.ndarray) -> float:
        probs, _ = self.forward(X)
        return cross_entropy(probs, np.asarray(y))

    def predict_proba(self, X: np.ndarray, batch: int = 512) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None]
        return np.concatenate([self.forward(X[i : i + batch])[0] for i in range(0, len(X), batch)])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=-1)

    def n_params(self) -> int:
        return sum(v.size for v in self.params.values())

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def zero_(self) -> "Classifier":
        for v in self.params.values():
            v[...] = 0.0
        return self


class _DenseHead:
    """ReLU dense stack followed by a linear softmax layer.

    Parameter names: ``W{i}``, ``b{i}`` for i = 1..len(hidden) + 1.
    """

    @staticmethod
    def init(params, rng, n_in, hidden, m):
        sizes = [n_in, *hidden]
        for i in range(len(hidden)):
            params[f"W{i + 1}"] = _he_uniform(rng, sizes[i], sizes[i + 1])
            params[f"b{i + 1}"] = np.zeros(sizes[i + 1])
        k = len(hidden) + 1
        params[f"W{k}"] = _glorot_uniform(rng, sizes[-1], m)
        params[f"b{k}"] = np.zeros(m)

    @staticmethod
    def forward(params, H, n_hidden):
        acts = [H]
        a = H
        for i in range(1, n_hidden + 1):
            a = np.maximum(a @ params[f"W{i}"] + params[f"b{i}"], 0.0)
            acts.append(a)
        k = n_hidden + 1
        logits = a @ params[f"W{k}"] + params[f"b{k}"]
        return softmax(logits), acts

    @staticmethod
    def backward(params, acts, dlogits, n_hidden, grads):
        k = n_hidden + 1
        d = dlogits
        for i in range(k, 0, -1):
            a_in = acts[i - 1]
            grads[f"W{i}"] = a_in.T @ d
            grads[f"b{i}"] = d.sum(0)
            d = d @ params[f"W{i}"].T
            if i > 1:
                d = d * (a_in > 0)
        return d  # gradient w.r.t. the head input


class MLPClassifier(Classifier):
    kind = "mlp"

    def __init__(self, n_in: int, m: int, hidden=(128, 64), seed: int = 0):
        super().__init__()
        self.n_in, self.m, self.hidden = n_in, m, tuple(hidden)
        self.seed = seed
        _DenseHead.init(self.params, np.random.default_rng(seed), n_in, self.hidden, m)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "n_in": self.n_in, "m": self.m, "hidden": list(self.hidden)}

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None]
        if X.shape[1] != self.n_in:
            raise ShapeMismatch(f"MLP expects {self.n_in} inputs, got {X.shape[1]}")
        return X

    def forward(self, X):
        X = self._check(X)
        probs, acts = _DenseHead.forward(self.params, X, len(self.hidden))
        return probs, (acts, probs)

    def backward(self, cache, y):
        acts, probs = cache
        grads: dict[str, np.ndarray] = {}
        _DenseHead.backward(self.params, acts, _softmax_ce_grad(probs, np.asarray(y)), len(self.hidden), grads)
        return grads

    def features(self, X):
        X = self._check(X)
        return _DenseHead.forward(self.params, X, len(self.hidden))[1][-1]


class SoftmaxRegression(MLPClassifier):
    kind = "softmax"

    def __init__(self, n_in: int, m: int, seed: int = 0):
        super().__init__(n_in, m, hidden=(), seed=seed)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "n_in": self.n_in, "m": self.m}


def pool_sequence(X: np.ndarray, stride: int) -> np.ndarray:
    """Average non-overlapping blocks of `stride` samples; a short last block is edge-padded."""
    if stride == 1:
        return X
    steps = -(-X.shape[1] // stride)
    pad = steps * stride - X.shape[1]
    if pad:
        X = np.concatenate([X, np.repeat(X[:, -1:], pad, axis=1)], axis=1)
    return X.reshape(X.shape[0], steps, stride).mean(-1)


class BiGRUClassifier(Classifier):
    """Bidirectional single-layer GRU classifier over a 1-D sequence.

    The input beat is block-averaged over `stride` samples and mapped from
    [0, 1] to [-1, 1]. GRU update per step:

        z = sigmoid(x Wz + h Uz + bz)
        r = sigmoid(x Wr + h Ur + br)
        n = tanh(x Wn + (r * h) Un + bn)
        h' = (1 - z) * n + z * h

    Gate weights are packed as ``W{d}`` (1 x 3h), ``U{d}`` (h x 3h), ``b{d}`` (3h)
    for direction d in {"f", "b"}.
    """

    kind = "birnn"

    def __init__(self, length: int, m: int, hidden_size: int = 32, dense=(64, 32),
                 stride: int = 4, seed: int = 0):
        super().__init__()
        self.length, self.m, self.h = length, m, hidden_size
        self.dense, self.stride, self.seed = tuple(dense), stride, seed
        rng = np.random.default_rng(seed)
        lim = 1.0 / np.sqrt(hidden_size)
        for d in "fb":
            # scalar input: wider input weights, update gate biased towards keeping state
            self.params[f"W{d}"] = rng.uniform(-3 * lim, 3 * lim, size=(1, 3 * hidden_size))
            self.params[f"U{d}"] = rng.uniform(-lim, lim, size=(hidden_size, 3 * hidden_size))
            self.params[f"b{d}"] = np.zeros(3 * hidden_size)
            self.params[f"b{d}"][:hidden_size] = 1.0
        _DenseHead.init(self.params, rng, 2 * hidden_size, self.dense, m)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "length": self.length, "m": self.m, "hidden_size": self.h,
                "dense": list(self.dense), "stride": self.stride}

    @property
    def steps(self) -> int:
        return len(range(0, self.length, self.stride))

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None]
        if X.shape[1] != self.length:
            raise ShapeMismatch(f"recurrent net expects beats of length {self.length}, got {X.shape[1]}")
        return 2.0 * pool_sequence(X, self.stride) - 1.0

    def _run(self, seq, d):
        """Run one direction over seq (B, T); returns final state and per-step cache."""
        W, U, b = self.params[f"W{d}"], self.params[f"U{d}"], self.params[f"b{d}"]
        h_size = self.h
        B, T = seq.shape
        h = np.zeros((B, h_size))
        steps = []
        Uzr, Un = U[:, : 2 * h_size], U[:, 2 * h_size :]
        for t in range(T):
            x = seq[:, t : t + 1]
            a = x @ W + b
            zr = sigmoid(a[:, : 2 * h_size] + h @ Uzr)
            z, r = zr[:, :h_size], zr[:, h_size:]
            rh = r * h
            n = np.tanh(a[:, 2 * h_size :] + rh @ Un)
            h_new = (1.0 - z) * n + z * h
            steps.append((x, h, z, r, rh, n))
            h = h_new
        return h, steps

    def _run_back(self, steps, dh, d, grads):
        W, U = self.params[f"W{d}"], self.params[f"U{d}"]
        h_size = self.h
        Uzr, Un = U[:, : 2 * h_size], U[:, 2 * h_size :]
        gW = np.zeros_like(W)
        gU = np.zeros_like(U)
        gb = np.zeros(3 * h_size)
        for x, h_prev, z, r, rh, n in reversed(steps):
            dn = dh * (1.0 - z)
            dz = dh * (h_prev - n)
            dh_prev = dh * z
            dan = dn * (1.0 - n * n)
            gU[:, 2 * h_size :] += rh.T @ dan
            drh = dan @ Un.T
            dr = drh * h_prev
            dh_prev += drh * r
            dazr = np.hstack([dz * z * (1.0 - z), dr * r * (1.0 - r)])
            gU[:, : 2 * h_size] += h_prev.T @ dazr
            dh_prev += dazr @ Uzr.T
            da = np.hstack([dazr, dan])
            gW += x.T @ da
            gb += da.sum(0)
            dh = dh_prev
        grads[f"W{d}"], grads[f"U{d}"], grads[f"b{d}"] = gW, gU, gb

    def _encode(self, X):
        seq = self._check(X)
        hf, sf = self._run(seq, "f")
        hb, sb = self._run(seq[:, ::-1], "b")
        return np.hstack([hf, hb]), (sf, sb)

    def forward(self, X):
        H, states = self._encode(X)
        probs, acts = _DenseHead.forward(self.params, H, len(self.dense))
        return probs, (states, acts, probs)

    def backward(self, cache, y):
        (sf, sb), acts, probs = cache
        grads: dict[str, np.ndarray] = {}
        dH = _DenseHead.backward(self.params, acts, _softmax_ce_grad(probs, np.asarray(y)),
                                 len(self.dense), grads)
        self._run_back(sf, dH[:, : self.h], "f", grads)
        self._run_back(sb, dH[:, self.h :], "b", grads)
        return grads

    def features(self, X):
        H, _ = self._encode(X)
        return _DenseHead.forward(self.params, H, len(self.dense))[1][-1]


def birnn_forward(model: BiGRUClassifier, beat: np.ndarray):
    return model.forward(beat)


def mlp_forward(model: MLPClassifier, gaf_flat: np.ndarray):
    return model.forward(gaf_flat)


def backward(model: Classifier, cache, target) -> dict[str, np.ndarray]:
    return model.backward(cache, np.atleast_1d(target))


def penultimate_features(model: Classifier, X: np.ndarray) -> np.ndarray:
    return model.features(X)


def grad_check(model: Classifier, X: np.ndarray, y, eps: float = 1e-5, n_coords: int = 200,
               seed: int = 0, extended: bool = False) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks `n_coords` coordinates sampled uniformly over all parameters
    (every coordinate when there are fewer). Relative error is
    |a - n| / max(|a|, |n|, 1e-12). Parameters are restored afterwards.

    With ``extended=True`` the finite-difference losses are evaluated in
    ``np.longdouble``. The analytic gradient is still the float64 backward pass;
    only the reference gets more accurate. In float64 the reference carries
    ~1e-12 absolute rounding noise, which exceeds 1e-4 relative error on the
    ~1e-9 gradients of some recurrent weights.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.atleast_1d(y)
    probs, cache = model.forward(X)
    grads = model.backward(cache, y)
    saved = model.params
    if extended:
        model.params = {k: v.astype(np.longdouble) for k, v in saved.items()}

    def loss():
        p, _ = model.forward(X)
        return -np.mean(np.log(p[np.arange(len(y)), y]))

    names = sorted(model.params)
    sizes = np.array([model.params[k].size for k in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    rng = np.random.default_rng(seed)
    picks = np.arange(total) if total <= n_coords else rng.choice(total, size=n_coords, replace=False)
    h = np.longdouble(eps) if extended else eps
    worst = 0.0
    try:
        for flat in picks:
            k = int(np.searchsorted(offsets, flat, side="right") - 1)
            name = names[k]
            p = model.params[name].reshape(-1)
            j = flat - offsets[k]
            old = p[j]
            p[j] = old + h
            up = loss()
            p[j] = old - h
            down = loss()
            p[j] = old
            num = float((up - down) / (2 * h))
            ana = float(grads[name].reshape(-1)[j])
            err = abs(ana - num) / max(abs(ana), abs(num), 1e-12)
            worst = max(worst, err)
    finally:
        model.params = saved
    return worst


@dataclass
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 30
    patience: int | None = 5
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


class Adam:
    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for k in sorted(params):
            g = grads[k]
            self.m[k] = c.beta1 * self.m[k] + (1 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1 - c.beta2) * g * g
            params[k] -= c.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + c.adam_eps)


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "val_loss", "val_acc"])
            for i, tl in enumerate(self.train_loss):
                vl = self.val_loss[i] if i < len(self.val_loss) else ""
                va = self.val_acc[i] if i < len(self.val_acc) else ""
                w.writerow([i + 1, repr(tl), repr(vl) if vl != "" else "", repr(va) if va != "" else ""])


def _holdout(y: np.ndarray, fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Stratified random holdout indices (train, val)."""
    if fraction <= 0:
        return np.arange(len(y)), np.arange(0)
    val = []
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        val.extend(idx[: int(round(fraction * len(idx)))])
    val = np.sort(np.array(val, dtype=np.int64))
    train = np.setdiff1d(np.arange(len(y)), val)
    return train, val


def train(model: Classifier, X: np.ndarray, y: np.ndarray, cfg: TrainConfig | None = None) -> History:
    """Mini-batch Adam on mean cross-entropy.

    A stratified `val_fraction` of the data is held out; training stops when the
    held-out loss has not improved for `patience` epochs and the best parameters
    are restored. With ``patience=None`` all `max_epochs` run.
    """
    cfg = cfg or TrainConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise EmptyDataset("training set is empty")
    rng = np.random.default_rng(cfg.seed)
    tr, va = _holdout(y, cfg.val_fraction, rng)
    if tr.size == 0:
        raise EmptyDataset("nothing left to train on after the validation holdout")
    opt = Adam(model.params, cfg)
    hist = History()
    best = np.inf
    best_params = model.copy_params()
    bad = 0
    for epoch in range(cfg.max_epochs):
        order = tr[rng.permutation(tr.size)]
        total, correct = 0.0, 0
        for i in range(0, order.size, cfg.batch_size):
            idx = order[i : i + cfg.batch_size]
            probs, cache = model.forward(X[idx])
            total += cross_entropy(probs, y[idx]) * idx.size
            correct += int((probs.argmax(-1) == y[idx]).sum())
            grads = model.backward(cache, y[idx])
            opt.step(model.params, grads)
        tl = total / order.size
        if not np.isfinite(tl):
            raise NumericError(f"non-finite training loss at epoch {epoch + 1}")
        hist.train_loss.append(tl)
        hist.train_acc.append(correct / order.size)
        if va.size:
            probs = model.predict_proba(X[va])
            vl = cross_entropy(probs, y[va])
            hist.val_loss.append(vl)
            hist.val_acc.append(float((probs.argmax(-1) == y[va]).mean()))
            log.debug("%s epoch %d train %.4f val %.4f", model.kind, epoch + 1, tl, vl)
            if cfg.patience is not None:
                if vl < best:
                    best, bad = vl, 0
                    best_params = model.copy_params()
                    hist.best_epoch = epoch
                else:
                    bad += 1
                    if bad >= cfg.patience:
                        hist.stopped_early = True
                        break
    if va.size and cfg.patience is not None and hist.best_epoch >= 0:
        model.params = best_params
    else:
        hist.best_epoch = len(hist.train_loss) - 1
    return hist


_KINDS = {"mlp": MLPClassifier, "softmax": SoftmaxRegression, "birnn": BiGRUClassifier}


def build(descriptor: dict, seed: int = 0) -> Classifier:
    d = dict(descriptor)
    kind = d.pop("kind")
    if kind == "birnn":
        return BiGRUClassifier(d["length"], d["m"], d["hidden_size"], tuple(d["dense"]), d["stride"], seed)
    if kind == "mlp":
        return MLPClassifier(d["n_in"], d["m"], tuple(d["hidden"]), seed)
    if kind == "softmax":
        return SoftmaxRegression(d["n_in"], d["m"], seed)
    raise ValueError(f"unknown model kind {kind!r}")


def save_checkpoint(model: Classifier, path: str | Path, seed: int = 0, cfg: TrainConfig | None = None) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "descriptor": model.descriptor(),
        "seed": seed,
        "config_hash": cfg.digest() if cfg else None,
        "tensors": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in sorted(model.params.items())},
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path: str | Path) -> Classifier:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    model = build(doc["descriptor"], doc.get("seed", 0))
    for k, t in doc["tensors"].items():
        arr = np.asarray(t["data"], dtype=np.float64).reshape(t["shape"])
        if k not in model.params or model.params[k].shape != arr.shape:
            raise ShapeMismatch(f"checkpoint tensor {k} {arr.shape} does not fit the model")
        model.params[k] = arr
    return model

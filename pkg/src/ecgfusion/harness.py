"""Experiment orchestration: dataset building, view training, fusion evaluation
and noise sweeps."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gaf as gaf_mod
from .beats import Beat, Dataset, minmax_normalize, record_split, segment_beats, smote, stack, stratified_split
from .config import load_config, train_config
from .errors import ConfigError, NumericError
from .fusion import FeatureFusionHead, dst_fuse, score_fuse
from .ingest import AamiClass, load_beat_csv, read_record
from .metrics import Metrics, compute_metrics
from .models import BiGRUClassifier, MLPClassifier, History, load_checkpoint, save_checkpoint, train
from .noise import CLEAN, NoiseKind, NoiseSpec, apply_noise, cell_seed
from .synthetic import synthetic_record

log = logging.getLogger(__name__)

METHODS = ("view1", "view2", "DST", "ScoreMean", "FeatureLevel")
SWEEP_COLUMNS = ("kind", "snr_db", "method", "accuracy", "macro_precision", "macro_recall", "seed")
NSTDB_RECORDS = {"nstdb_bw": "bw", "nstdb_em": "em", "nstdb_ma": "ma"}


@dataclass
class PreparedData:
    dataset: Dataset
    class_names: list[str]
    rate: float
    window_s: float


def _class_map(cfg) -> dict[int, int]:
    names = cfg["dataset"]["classes"]
    return {int(AamiClass[n]): i for i, n in enumerate(names)}


def build_dataset(cfg: dict) -> PreparedData:
    d = cfg["dataset"]
    seed = cfg["seed"]
    cmap = _class_map(cfg)
    L = d["L"]
    beats: list[Beat] = []
    rate = 360.0
    source = d["source"]
    if source == "synthetic":
        for r in range(d["synthetic_records"]):
            rec = synthetic_record(n_beats=d["synthetic_beats"], seed=100 * seed + r, name=f"syn{r}")
            rate = rec.sampling_rate
            beats += segment_beats(rec.lead_mv(0), rate, rec.annotations, d["pre_ms"], d["post_ms"], L,
                                   rec.header.record_name, classes=list(cmap))
    elif source == "wfdb":
        root = Path(d["path"])
        if not d["path"] or not root.is_dir():
            raise ConfigError(f"dataset.path must be a directory of WFDB records, got {d['path']!r}")
        records = [r for r in d["records"] if r not in set(d["exclude"])]
        if not records:
            raise ConfigError("dataset.records is empty")
        for name in records:
            rec = read_record(root / name)
            rate = rec.sampling_rate
            lead = d["lead_index"] if d["lead_index"] is not None else rec.header.lead_index(d["lead"])
            beats += segment_beats(rec.lead_mv(lead), rate, rec.annotations, d["pre_ms"], d["post_ms"], L,
                                   name, classes=list(cmap))
    elif source == "csv":
        path = Path(d["path"])
        if not path.is_file():
            raise ConfigError(f"dataset.path must be a beat CSV file, got {d['path']!r}")
        X, y = load_beat_csv(path, m=5)
        beats = [Beat(x, int(c), "csv", i) for i, (x, c) in enumerate(zip(X, y)) if int(c) in cmap]
    else:
        raise ConfigError(f"unknown dataset source {source!r}")
    beats = [Beat(b.samples, cmap[b.label], b.record_id, b.r_peak) for b in beats]
    if beats and len(beats[0].samples) != L:
        raise ConfigError(f"beats have length {len(beats[0].samples)} but dataset.L = {L}")
    m = len(cmap)
    if d["smoke"]:
        ds = Dataset(list(beats), list(beats), m, seed, "smoke")
    elif d["split_mode"] == "record":
        ds = record_split(beats, d["train_ratio"], seed, m)
    else:
        ds = stratified_split(beats, d["train_ratio"], seed, m)
    ds.meta["classes"] = d["classes"]
    ds.meta["source"] = source
    return PreparedData(ds, list(d["classes"]), rate, (d["pre_ms"] + d["post_ms"]) / 1000.0)


@dataclass
class Predictions:
    probs: dict[str, np.ndarray]
    chosen: dict[str, np.ndarray]


@dataclass
class Experiment:
    """Two view classifiers plus the fusion rules over them."""

    cfg: dict
    data: PreparedData
    rnn: BiGRUClassifier | None = None
    mlp: MLPClassifier | None = None
    head: FeatureFusionHead | None = None
    histories: dict[str, History] = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.data.dataset.m

    @property
    def gaf_range(self) -> tuple[float, float]:
        lo, hi = self.cfg["gaf"]["range"]
        return float(lo), float(hi)

    def normalize(self, X: np.ndarray) -> np.ndarray:
        Xn = minmax_normalize(X)
        lo, hi = self.gaf_range
        return Xn * (hi - lo) + lo

    def images(self, Xn: np.ndarray) -> np.ndarray:
        return gaf_mod.gaf_images(Xn, self.cfg["gaf"]["res"], self.gaf_range)

    def rnn_input(self, Xn: np.ndarray) -> np.ndarray:
        lo, hi = self.gaf_range
        return (Xn - lo) / (hi - lo)

    def training_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        X, y = stack(self.data.dataset.train)
        res = smote(self.normalize(X), y, k=self.cfg["dataset"]["smote_k"], seed=self.cfg["seed"])
        return res.X, res.y

    def fit(self) -> "Experiment":
        cfg, seed = self.cfg, self.cfg["seed"]
        X, y = self.training_arrays()
        G = self.images(X)
        r, p = cfg["models"]["rnn"], cfg["models"]["mlp"]
        self.rnn = BiGRUClassifier(X.shape[1], self.m, r["hidden_size"], tuple(r["dense"]), r["stride"], seed)
        self.mlp = MLPClassifier(G.shape[1], self.m, tuple(p["hidden"]), seed + 1)
        self.histories["rnn"] = train(self.rnn, self.rnn_input(X), y, train_config(cfg, 0))
        self.histories["mlp"] = train(self.mlp, G, y, train_config(cfg, 1))
        f1, f2 = self.rnn.features(self.rnn_input(X)), self.mlp.features(G)
        self.head = FeatureFusionHead(f1.shape[1], f2.shape[1], self.m, seed + 2)
        self.histories["head"] = self.head.fit(f1, f2, y, train_config(cfg, 2))
        return self

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        seed = self.cfg["seed"]
        save_checkpoint(self.rnn, out / "rnn.json", seed, train_config(self.cfg, 0))
        save_checkpoint(self.mlp, out / "mlp.json", seed + 1, train_config(self.cfg, 1))
        save_checkpoint(self.head.model, out / "head.json", seed + 2, train_config(self.cfg, 2))
        for name, h in self.histories.items():
            h.write_csv(out / f"history_{name}.csv")

    def load(self, out_dir: str | Path) -> "Experiment":
        out = Path(out_dir)
        self.rnn = load_checkpoint(out / "rnn.json")
        self.mlp = load_checkpoint(out / "mlp.json")
        lin = load_checkpoint(out / "head.json")
        d1 = self.rnn.dense[-1]
        self.head = FeatureFusionHead(d1, lin.n_in - d1, lin.m)
        self.head.model = lin
        return self

    def predict(self, Xn: np.ndarray) -> Predictions:
        """Scores and decisions of every method for already-normalized beats."""
        fz = self.cfg["fusion"]
        G = self.images(Xn)
        Xr = self.rnn_input(Xn)
        P1 = self.rnn.predict_proba(Xr)
        P2 = self.mlp.predict_proba(G)
        if not (np.all(np.isfinite(P1)) and np.all(np.isfinite(P2))):
            raise NumericError("non-finite class probabilities")
        dst = dst_fuse(P1, P2, fz["renormalize"], fz["conflict_reduction"])
        score = score_fuse(P1, P2)
        feat = self.head.predict(self.rnn.features(Xr), self.mlp.features(G))
        probs = {"view1": P1, "view2": P2, "DST": dst.scores, "ScoreMean": score.scores,
                 "FeatureLevel": feat.scores}
        chosen = {"view1": P1.argmax(1), "view2": P2.argmax(1), "DST": dst.chosen,
                  "ScoreMean": score.chosen, "FeatureLevel": feat.chosen}
        return Predictions(probs, chosen)

    def evaluate(self, Xn: np.ndarray, y: np.ndarray) -> tuple[dict[str, Metrics], Predictions]:
        pred = self.predict(Xn)
        avg = self.cfg["metrics"]["average"]
        return {k: compute_metrics(y, pred.chosen[k], self.m, avg) for k in METHODS}, pred

    def test_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return stack(self.data.dataset.test)


def write_predictions(path: str | Path, y: np.ndarray, pred: Predictions, m: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beat_id", "true_label"]
                   + [f"p1_{j}" for j in range(m)] + [f"p2_{j}" for j in range(m)]
                   + [f"dst_{j}" for j in range(m)] + [f"pred_{k}" for k in METHODS])
        for i in range(len(y)):
            w.writerow([i, int(y[i])]
                       + [f"{v:.6g}" for v in pred.probs["view1"][i]]
                       + [f"{v:.6g}" for v in pred.probs["view2"][i]]
                       + [f"{v:.6g}" for v in pred.probs["DST"][i]]
                       + [int(pred.chosen[k][i]) for k in METHODS])


def prepare_experiment(cfg: dict, checkpoint_dir: str | Path | None = None) -> Experiment:
    exp = Experiment(cfg, build_dataset(cfg))
    if checkpoint_dir and (Path(checkpoint_dir) / "rnn.json").exists():
        log.info("loading checkpoints from %s", checkpoint_dir)
        return exp.load(checkpoint_dir)
    return exp.fit()


def run_experiment(config, out_dir: str | Path | None = None,
                   experiment: Experiment | None = None) -> dict[str, Metrics]:
    """Train (or reuse) both views and score every method on the clean test split.

    Writes ``metrics.json`` and ``predictions.csv`` when `out_dir` is given.
    """
    cfg = load_config(config)
    exp = experiment or prepare_experiment(cfg)
    X, y = exp.test_arrays()
    metrics, pred = exp.evaluate(exp.normalize(X), y)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        doc = {"seed": cfg["seed"], "classes": exp.data.class_names,
               "manifest": exp.data.dataset.manifest(),
               "methods": {k: v.as_dict() for k, v in metrics.items()}}
        (out / "metrics.json").write_text(json.dumps(doc, indent=2))
        write_predictions(out / "predictions.csv", y, pred, exp.m)
    return metrics


@dataclass
class SweepRow:
    kind: str
    snr_db: float
    method: str
    metrics: Metrics
    seed: int


@dataclass
class SweepResult:
    rows: list[SweepRow]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in self.rows:
            snr = "inf" if math.isinf(r.snr_db) else f"{r.snr_db:g}"
            w.writerow([r.kind, snr, r.method, f"{r.metrics.accuracy:.6f}",
                        f"{r.metrics.macro_precision:.6f}", f"{r.metrics.macro_recall:.6f}", r.seed])
        return buf.getvalue()

    def lookup(self, kind: str, snr_db: float, method: str) -> Metrics:
        for r in self.rows:
            if r.kind == kind and r.snr_db == snr_db and r.method == method:
                return r.metrics
        raise KeyError((kind, snr_db, method))


def load_nstdb(directory: str | Path, kinds, beat_rate: float) -> dict[str, np.ndarray]:
    """NSTDB noise records (first channel, mV) resampled to the beat sample rate."""
    out = {}
    for kind in kinds:
        if kind not in NSTDB_RECORDS:
            continue
        rec = read_record(Path(directory) / NSTDB_RECORDS[kind], annotator=None)
        sig = rec.lead_mv(0)
        n_out = int(round(sig.size * beat_rate / rec.sampling_rate))
        out[kind] = np.interp(np.linspace(0, sig.size - 1, n_out), np.arange(sig.size), sig)
    return out


def _snr_key(snr: float) -> int:
    return int(round(snr * 1000)) + 1_000_000


def noisy_test_set(X: np.ndarray, kind: str, snr: float, root_seed: int, rate: float,
                   nstdb: dict | None = None) -> np.ndarray:
    """Normalized noisy copies of the (physical-unit) test beats; per-beat seeds."""
    k = list(NoiseKind).index(NoiseKind(kind))
    return np.stack([
        apply_noise(x, NoiseSpec(kind, snr, cell_seed(root_seed, k, _snr_key(snr), i)), rate, nstdb)
        for i, x in enumerate(X)
    ])


def noise_sweep(config, snrs=None, kinds=None, experiment: Experiment | None = None,
                out_dir: str | Path | None = None) -> SweepResult:
    """Evaluate every method on the clean test split and on each (kind, snr) noisy copy."""
    cfg = load_config(config)
    snrs = list(cfg["sweep"]["snrs"] if snrs is None else snrs)
    kinds = list(cfg["sweep"]["kinds"] if kinds is None else kinds)
    exp = experiment or prepare_experiment(cfg)
    seed = cfg["seed"]
    X, y = exp.test_arrays()
    L = X.shape[1]
    beat_rate = L / exp.data.window_s
    nstdb = None
    if any(NoiseKind(k).needs_record for k in kinds):
        if not cfg["sweep"]["nstdb_dir"]:
            raise ConfigError("NSTDB noise kinds need sweep.nstdb_dir")
        nstdb = load_nstdb(cfg["sweep"]["nstdb_dir"], kinds, beat_rate)

    cells, seen = [], set()
    for kind in kinds:
        for snr in snrs:
            key = (kind, float(snr))
            if key in seen:
                warnings.warn(f"duplicate sweep cell {key} ignored", stacklevel=2)
                continue
            seen.add(key)
            cells.append(key)

    def run_cell(cell):
        kind, snr = cell
        if math.isinf(snr):
            Xn = exp.normalize(X)
        else:
            Xn = exp.normalize(noisy_test_set(X, kind, snr, seed, beat_rate, nstdb))
        return exp.evaluate(Xn, y)[0]

    rows = [SweepRow("clean", CLEAN, meth, met, seed) for meth, met in exp.evaluate(exp.normalize(X), y)[0].items()]
    with ThreadPoolExecutor(max_workers=cfg["sweep"]["workers"]) as pool:
        results = list(pool.map(run_cell, cells))
    for (kind, snr), res in zip(cells, results):
        rows += [SweepRow(kind, snr, meth, res[meth], seed) for meth in METHODS]
    result = SweepResult(rows)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(result.to_csv())
    return result

"""Command line entry point: ``ecgfusion <command> [--config PATH] [--seed N] [--out-dir DIR]``.

Exit codes: 0 success, 1 config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, EcgFusionError

log = logging.getLogger("ecgfusion")


def _cfg(args):
    from .config import load_config

    return load_config(args.config, seed=args.seed, out_dir=args.out_dir)


def _out(cfg) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args) -> int:
    from .ingest import map_to_aami, read_record, signal_checksum

    if not args.records:
        raise ConfigError("ingest needs at least one record path")
    for path in args.records:
        rec = read_record(path, annotator=args.annotator or None)
        h = rec.header
        counts: dict[str, int] = {}
        for a in rec.annotations:
            cls = map_to_aami(a.symbol)
            key = cls.name if cls is not None else "non-beat"
            counts[key] = counts.get(key, 0) + 1
        print(json.dumps({
            "record": h.record_name,
            "n_signals": h.n_signals,
            "sampling_rate": h.sampling_rate,
            "n_samples": h.n_samples,
            "signals": [s.description for s in h.signals],
            "checksums": signal_checksum(rec.adu).tolist(),
            "annotations": len(rec.annotations),
            "aami_counts": counts,
        }))
    return 0


def cmd_segment(args) -> int:
    from .beats import stack
    from .harness import build_dataset
    from .ingest import write_beat_csv

    cfg = _cfg(args)
    out = _out(cfg)
    data = build_dataset(cfg)
    for name in ("train", "test"):
        X, y = stack(getattr(data.dataset, name))
        write_beat_csv(out / f"beats_{name}.csv", X, y)
    data.dataset.write_manifest(out / "manifest.json")
    print(json.dumps(data.dataset.counts()))
    return 0


def cmd_gaf_export(args) -> int:
    from .beats import minmax_normalize, stack
    from .gaf import downsample, export_csv, export_pgm, gaf_encode
    from .harness import build_dataset

    cfg = _cfg(args)
    out = _out(cfg) / "gaf"
    out.mkdir(exist_ok=True)
    X, y = stack(build_dataset(cfg).dataset.test)
    res = args.res or cfg["gaf"]["res"]
    lo, hi = cfg["gaf"]["range"]
    for i in range(min(args.count, len(X))):
        g = gaf_encode(minmax_normalize(X[i]) * (hi - lo) + lo, (lo, hi))
        if not args.full:
            g = downsample(g, res)
        export_pgm(g, out / f"beat{i:04d}_class{y[i]}.pgm")
        if args.csv:
            export_csv(g, out / f"beat{i:04d}_class{y[i]}.csv")
    print(f"wrote {min(args.count, len(X))} images to {out}")
    return 0


def cmd_train(args) -> int:
    from .harness import Experiment, build_dataset

    cfg = _cfg(args)
    out = _out(cfg)
    exp = Experiment(cfg, build_dataset(cfg)).fit()
    exp.save(out)
    print(json.dumps({k: {"epochs": len(h.train_loss), "final_train_loss": h.train_loss[-1]}
                      for k, h in exp.histories.items()}))
    return 0


def cmd_eval(args) -> int:
    from .harness import prepare_experiment, run_experiment

    cfg = _cfg(args)
    out = _out(cfg)
    exp = prepare_experiment(cfg, checkpoint_dir=out)
    metrics = run_experiment(cfg, out_dir=out, experiment=exp)
    for k, m in metrics.items():
        print(f"{k:13s} acc {m.accuracy:.4f}  P {m.macro_precision:.4f}  R {m.macro_recall:.4f}")
    return 0


def cmd_sweep(args) -> int:
    from .harness import noise_sweep, prepare_experiment

    cfg = _cfg(args)
    out = _out(cfg)
    exp = prepare_experiment(cfg, checkpoint_dir=out)
    result = noise_sweep(cfg, experiment=exp, out_dir=out)
    sys.stdout.write(result.to_csv())
    return 0


def cmd_grad_check(args) -> int:
    from .models import BiGRUClassifier, MLPClassifier, SoftmaxRegression, grad_check

    rng = np.random.default_rng(args.seed or 0)
    m = 5
    checks = {
        "softmax": (SoftmaxRegression(20, m, seed=1), rng.normal(size=(1, 20))),
        "mlp": (MLPClassifier(256, m, seed=2), rng.uniform(-1, 1, size=(1, 256))),
        "birnn": (BiGRUClassifier(48, m, seed=3), rng.random((1, 48))),
    }
    worst = {}
    ext = not args.float64
    for name, (model, x) in checks.items():
        worst[name] = grad_check(model, x, [2], eps=args.eps, n_coords=args.coords, seed=args.seed or 0,
                                 extended=ext)
        ref = "long double" if ext else "float64"
        print(f"{name:8s} max relative error {worst[name]:.3e} (eps {args.eps:g}, {args.coords} coordinates, {ref} reference)")
    if not all(np.isfinite(v) for v in worst.values()):
        return 3
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out-dir", dest="out_dir", default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="ecgfusion", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", parents=[common], help="read WFDB records and summarize them")
    s.add_argument("records", nargs="*", help="record paths without extension")
    s.add_argument("--annotator", default="atr")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("segment", parents=[common], help="build the beat dataset and write CSV + manifest")
    s.set_defaults(func=cmd_segment)

    s = sub.add_parser("gaf-export", parents=[common], help="write GAF images of test beats as PGM")
    s.add_argument("--count", type=int, default=10)
    s.add_argument("--res", type=int, default=None)
    s.add_argument("--full", action="store_true", help="skip downsampling")
    s.add_argument("--csv", action="store_true", help="also dump each matrix as CSV")
    s.set_defaults(func=cmd_gaf_export)

    s = sub.add_parser("train", parents=[common], help="train both views and the feature-fusion head")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", parents=[common], help="clean test metrics for every method")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", parents=[common], help="noise robustness sweep")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("grad-check", parents=[common], help="finite-difference gradient checks")
    s.add_argument("--coords", type=int, default=200)
    s.add_argument("--eps", type=float, default=1e-5)
    s.add_argument("--float64", action="store_true", help="finite differences in float64 instead of long double")
    s.set_defaults(func=cmd_grad_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name in ("config", "seed", "out_dir", "verbose"):
        if not hasattr(args, name):
            setattr(args, name, None)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except EcgFusionError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())

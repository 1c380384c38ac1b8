"""Command-line entry point: ``mcdyn <command> --config <preset|path> ...``.

Commands write plain CSV artifacts into the output directory:

=============  ==============================================================
simulate       ``series.csv``: ``t,value`` (``t,value_0,...`` for vectors)
train          ``checkpoints/ckpt_NNNNN.txt`` and ``log.csv``
               (``attempts,accepts,lambda``)
bifurcate      ``diagram.csv``: ``abscissa,label,branch,diverged,point``
predict        ``prediction.csv``: ``t,value`` (+ ``value_denorm``)
spectrum       ``spectrum.csv``: ``frequency,power``; ``peaks.csv``:
               ``rank,frequency,power``
sectionmap     ``section_map.csv``: ``delay1,delay2``
coeffs         ``coeffs.csv``: ``monomial,coefficient`` for one checkpoint,
               ``coeff_trace.csv`` for a checkpoint directory
=============  ==============================================================

Exit status: 0 success, 1 divergence or empty fatal result, 2 config or
input error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, dynsys
from .config import RunConfig
from .errors import (ConfigError, ConstantSeries, EmptyInput, EvaluationDiverged,
                     IntegrationDiverged, NoUsableSamples, NonMonotonicTime, ParseError,
                     TooShort, TooSparse, WrongArchitecture)
from .experiments import TrainingData, load_training_data, run_chain, seed_window
from .machine import Diverged, free_run, predict
from .timeseries import TimeSeries
from .trainer import coefficient_trace, load_checkpoint, save_checkpoint

log = logging.getLogger("mcdyn")

INPUT_ERRORS = (ConfigError, WrongArchitecture, ParseError, NoUsableSamples, TooShort,
                TooSparse, ConstantSeries, NonMonotonicTime, FileNotFoundError)
RUNTIME_ERRORS = (IntegrationDiverged, EvaluationDiverged, EmptyInput)


def _seed_window(cfg: RunConfig, data: TrainingData, at_end: bool) -> TimeSeries:
    return seed_window(data.series, cfg.arch(), cfg._num("machine", "M", kind=int), at_end)


def _write_series(path: Path, ts: TimeSeries, extra: dict[str, np.ndarray] | None = None):
    names = ["value"] if ts.dim == 1 else [f"value_{j}" for j in range(ts.dim)]
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *names, *extra])
        for k, seg in enumerate(ts.segments):
            t = ts.times(k)
            for i in range(seg.shape[0]):
                w.writerow([repr(float(t[i])), *(repr(float(v)) for v in seg[i]),
                            *(repr(float(col[i])) for col in extra.values())])


# -- commands ------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, out: Path, args) -> int:
    data = load_training_data(cfg)
    _write_series(out / "series.csv", data.series)
    log.info("wrote %d records to %s", data.series.n_records, out / "series.csv")
    return 0


def _train_chain(cfg: RunConfig, out: Path, machine_seed: int, trainer_seed: int) -> float:
    ck_dir = out / "checkpoints"
    ck_dir.mkdir(parents=True, exist_ok=True)
    counter = [0]
    with open(out / "log.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["attempts", "accepts", "lambda"])

        def on_ck(ck):
            save_checkpoint(ck, ck_dir / f"ckpt_{counter[0]:05d}.txt")
            counter[0] += 1
            w.writerow([ck.attempts, ck.accepts, repr(ck.lam)])
            fh.flush()
            log.info("attempts=%d accepts=%d lambda=%.6g", ck.attempts, ck.accepts, ck.lam)

        chain = run_chain(cfg, machine_seed, trainer_seed, on_checkpoint=on_ck)
    return chain.final.lam


def _chain_job(job):
    cfg, out, ms, ts = job
    return _train_chain(cfg, out, ms, ts)


def cmd_train(cfg: RunConfig, out: Path, args) -> int:
    ms, ts = cfg.seed("machine"), cfg.seed("trainer")
    if args.seed is not None:
        ms, ts = args.seed, args.seed + 1
    if args.chains <= 1:
        _train_chain(cfg, out, ms, ts)
        return 0
    jobs = [(cfg, out / f"chain_{k}", ms + 1000 * k, ts + 1000 * k) for k in range(args.chains)]
    with ProcessPoolExecutor() as pool:
        for job, lam in zip(jobs, pool.map(_chain_job, jobs)):
            log.info("%s: final lambda %.6g", job[1].name, lam)
    return 0


def _checkpoint_paths(arg: str | None, out: Path) -> list[Path]:
    p = Path(arg) if arg else out / "checkpoints"
    if p.is_dir():
        paths = sorted(p.glob("ckpt_*.txt"))
        if not paths:
            raise FileNotFoundError(f"no checkpoint files in {p}")
        return paths
    if not p.exists():
        raise FileNotFoundError(f"checkpoint {p} not found")
    return [p]


def cmd_bifurcate(cfg: RunConfig, out: Path, args) -> int:
    if args.mode == "target":
        spec = cfg.system()
        inits = cfg.get("scan", "inits", [list(x) for x in dynsys.DEFAULT_LORENZ_INITS]
                        if spec.dim == 3 else [[0.5, 0.0]])
        diagram = dynsys.target_bifurcation_scan(
            spec, cfg.need("scan", "axis"), cfg.scan_values(), cfg.section_config(),
            cfg.free_run(), inits, tau=cfg._num("data", "tau", 0.01),
            dt=cfg._num("system", "dt", 1e-3))
    else:
        data = load_training_data(cfg)
        cks = [load_checkpoint(p) for p in _checkpoint_paths(args.checkpoint, out)]
        diagram = analysis.machine_bifurcation(
            cks, _seed_window(cfg, data, at_end=False), cfg.section_config(), cfg.free_run(),
            reference_amplitude=data.series.max_abs())
    diagram.to_csv(out / "diagram.csv")
    n_div = sum(r.diverged for r in diagram.rows)
    log.info("wrote %d rows (%d diverged) to %s", len(diagram), n_div, out / "diagram.csv")
    return 0


def cmd_predict(cfg: RunConfig, out: Path, args) -> int:
    data = load_training_data(cfg)
    ck = load_checkpoint(_checkpoint_paths(args.checkpoint, out)[-1])
    seed = _seed_window(cfg, data, at_end=True)
    vals = predict(ck.machine, seed, args.horizon)
    t_last = seed.times(0)[-1]
    t = t_last + seed.tau * np.arange(1, args.horizon + 1)
    path = out / "prediction.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        names = ["value"] if vals.shape[1] == 1 else [f"value_{j}" for j in range(vals.shape[1])]
        if data.norm is not None:
            names += [n + "_denorm" for n in names]
        w.writerow(["t", *names])
        for i in range(vals.shape[0]):
            row = [repr(float(t[i])), *(repr(float(v)) for v in vals[i])]
            if data.norm is not None:
                row += [repr(float(v)) for v in data.norm.denormalize(vals[i])]
            w.writerow(row)
    log.info("wrote %d predicted steps to %s", vals.shape[0], path)
    return 0


def _analysed_series(cfg: RunConfig, out: Path, args) -> TimeSeries:
    """The training data, or a free run of ``--checkpoint`` when given."""
    data = load_training_data(cfg)
    if not args.checkpoint:
        return data.series.longest_segment()
    ck = load_checkpoint(_checkpoint_paths(args.checkpoint, out)[-1])
    res = free_run(ck.machine, _seed_window(cfg, data, at_end=False), cfg.free_run(),
                   reference_amplitude=data.series.max_abs())
    if isinstance(res, Diverged):
        raise EvaluationDiverged(f"free run diverged at step {res.step}")
    return res


def cmd_spectrum(cfg: RunConfig, out: Path, args) -> int:
    series = _analysed_series(cfg, out, args)
    spec = analysis.periodogram(series)
    spec.to_csv(out / "spectrum.csv")
    with open(out / "peaks.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "frequency", "power"])
        for r, (f, p) in enumerate(spec.peaks):
            w.writerow([r, repr(f), repr(p)])
    if len(spec.peaks) >= 2:
        print(f"peak ratio {spec.peak_ratio():.4f}")
    return 0


def cmd_sectionmap(cfg: RunConfig, out: Path, args) -> int:
    series = _analysed_series(cfg, out, args)
    pairs = analysis.section_map(series, cfg._num("section_map", "c", 0.0),
                                 cfg._num("section_map", "T1", 0.1),
                                 cfg._num("section_map", "T2", 0.2),
                                 interp=cfg.section_config().interp)
    with open(out / "section_map.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delay1", "delay2"])
        for a, b in pairs:
            w.writerow([repr(float(a)), repr(float(b))])
    if pairs.size == 0:
        log.error("no section crossings")
        return 1
    return 0


def cmd_coeffs(cfg: RunConfig | None, out: Path, args) -> int:
    paths = _checkpoint_paths(args.checkpoint, out)
    k = args.output_dim
    if len(paths) == 1:
        analysis.expand_cubic_coefficients(load_checkpoint(paths[0]).machine, k).to_csv(
            out / "coeffs.csv")
        return 0
    cks = [load_checkpoint(p) for p in paths]
    trace = coefficient_trace(cks, k)
    with open(out / "coeff_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["checkpoint", "attempts", "lambda", *analysis.MONOMIAL_LABELS])
        for i, (ck, pc) in enumerate(zip(cks, trace)):
            w.writerow([i, ck.attempts, repr(ck.lam), *(repr(float(c)) for c in pc.values)])
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "bifurcate": cmd_bifurcate,
    "predict": cmd_predict,
    "spectrum": cmd_spectrum,
    "sectionmap": cmd_sectionmap,
    "coeffs": cmd_coeffs,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcdyn", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "coeffs",
                       help="preset name or path to a YAML config")
        p.add_argument("--out", help="output directory (default: output.dir from config)")
        p.add_argument("--seed", type=int, help="override both machine and trainer seeds")
        p.add_argument("--checkpoint", help="checkpoint file or directory")
        if name == "bifurcate":
            p.add_argument("--mode", choices=("machine", "target"), default="machine")
        if name == "predict":
            p.add_argument("--horizon", type=int, default=1000, help="number of steps")
        if name == "train":
            p.add_argument("--chains", type=int, default=1)
        if name == "coeffs":
            p.add_argument("--output-dim", type=int, default=0)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig.load(args.config) if args.config else None
        if args.out:
            out = Path(args.out)
        elif cfg is not None:
            out = cfg.output_dir()
        else:
            out = Path(".")
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except INPUT_ERRORS as exc:
        print(f"mcdyn: error: {exc}", file=sys.stderr)
        return 2
    except RUNTIME_ERRORS as exc:
        print(f"mcdyn: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Train one delayed machine and report where its diagram changes period.

    python scripts/machine_cascade.py fig2a --max-attempts 4000000

Writes ``diagram.csv`` and ``counts.csv`` (checkpoint, attempts, lambda,
clusters) under ``runs/<preset>_cascade``.
"""

import argparse
import csv
import logging
import os
from pathlib import Path

from mcdyn.config import RunConfig
from mcdyn.experiments import (chain_diagram, doubling_onsets, first_index, row_cluster_counts,
                               run_chain)
from mcdyn.trainer import TrainSchedule

log = logging.getLogger("cascade")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("preset", nargs="?", default="fig2a")
    ap.add_argument("--max-attempts", type=int)
    ap.add_argument("--seed", type=int, nargs=2, metavar=("MACHINE", "TRAINER"))
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = RunConfig.load(args.preset)
    sched = cfg.schedule()
    if args.max_attempts is not None:
        sched = TrainSchedule(sched.checkpoint_every, args.max_attempts, sched.stop_lambda,
                              sched.dense_every, sched.dense_until)
    ms, ts = args.seed or (None, None)
    chain = run_chain(cfg, ms, ts, sched,
                      on_checkpoint=lambda ck: log.info("%10d  lambda %.4g", ck.attempts, ck.lam))
    log.info("trained in %.0f s", chain.seconds)

    diagram = chain_diagram(cfg, chain)
    counts = row_cluster_counts(diagram.rows)
    out = args.out or Path("runs") / f"{cfg.name}_cascade"
    os.makedirs(out, exist_ok=True)
    diagram.to_csv(out / "diagram.csv")
    with open(out / "counts.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["checkpoint", "attempts", "lambda", "clusters"])
        for i, (ck, c) in enumerate(zip(chain.checkpoints, counts)):
            w.writerow([i, ck.attempts, repr(ck.lam), "" if c is None else c])

    i1 = first_index(counts, lambda c: c == 1)
    onsets = doubling_onsets(counts)
    for label, i in [("period 1", i1), *zip(("period >=2", "period >=4", "period >=8"), onsets)]:
        if i is None:
            print(f"{label:>11}: never")
        else:
            ck = chain.checkpoints[i]
            print(f"{label:>11}: checkpoint {i}, {ck.attempts} attempts, 1/lambda {1 / ck.lam:.0f}")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()

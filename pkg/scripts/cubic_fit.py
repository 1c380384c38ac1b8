"""Compare a trained h^3 machine with the best cubic one-step model.

The vector machine with f(h) = h^3 is a cubic polynomial map, so the
least-squares fit over all 20 monomials on the same samples shows what the
training could reach in principle. The script trains (or loads) a machine,
expands its x-equation and prints both coefficient sets side by side.

    python scripts/cubic_fit.py --minutes 10
    python scripts/cubic_fit.py --checkpoint runs/fig6a/checkpoints/ckpt_00010.txt
"""

import argparse
import time

import numpy as np

from mcdyn import analysis
from mcdyn.config import RunConfig
from mcdyn.experiments import initial_machine, load_training_data
from mcdyn.trainer import build_samples, init_trainer, load_checkpoint


def design(states):
    cols = [np.prod(states ** np.array(e), axis=1) for _, e in analysis.MONOMIALS]
    return np.column_stack(cols)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="fig6a")
    ap.add_argument("--checkpoint")
    ap.add_argument("--minutes", type=float, default=5.0)
    args = ap.parse_args()

    cfg = RunConfig.load(args.config)
    data = load_training_data(cfg)
    if args.checkpoint:
        m = load_checkpoint(args.checkpoint).machine
        lam = load_checkpoint(args.checkpoint).lam
    else:
        m = initial_machine(cfg, data, cfg.seed("machine"))
        samples = build_samples(data.series, m.M, m.arch)
        st = init_trainer(m, samples, seed=cfg.seed("trainer"))
        t0 = time.perf_counter()
        while time.perf_counter() - t0 < 60 * args.minutes:
            st.run(1_000_000)
            print(f"{st.attempts:>11d} attempts  lambda {st.lam:.4g}", flush=True)
        m, lam = st.machine, st.lam

    samples = build_samples(data.series, m.M, m.arch)
    X = samples.inputs.T
    A = design(X)
    target = samples.increments[0] / m.tau
    fit, *_ = np.linalg.lstsq(A, target, rcond=None)
    resid = samples.increments[0] - m.tau * (A @ fit)
    lam_fit = np.sqrt(np.sum(resid ** 2) / samples.P_effective)

    trained = analysis.expand_cubic_coefficients(m, 0)
    print(f"\nx-equation, trained lambda {lam:.3g}; least-squares lambda_x {lam_fit:.3g}")
    print(f"condition number of the monomial design: {np.linalg.cond(A):.3g}")
    print(f"{'monomial':>8} {'trained':>10} {'lstsq':>10}")
    for (name, _), a, b in zip(analysis.MONOMIALS, trained.values, fit):
        print(f"{name:>8} {a:10.4f} {b:10.4f}")


if __name__ == "__main__":
    main()

"""Monotone Monte Carlo training with incrementally maintained cost.

Each attempt picks one scalar parameter uniformly over all of them,
redraws it uniformly inside its bound and keeps the change iff the RMS
one-step error does not increase. Per-neuron pre-activation and transfer
caches plus per-sample hidden sums make one attempt cost O(P) instead of
a full forward pass.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import asdict, dataclass, field
from typing import Callable

import numba
import numpy as np

from .errors import EvaluationDiverged, NoUsableSamples
from .machine import FASTMATH, Arch, Machine, dumps_machine, load_machine
from .timeseries import TimeSeries

RNG_BLOCK = 1 << 16


@dataclass(frozen=True)
class SampleSet:
    """Teacher-forced one-step samples, stored column-wise.

    ``inputs`` has shape ``(K, P)`` (hidden-layer inputs per sample);
    ``current`` and ``targets`` have shape ``(n_out, P)``.
    """

    arch: Arch
    M: int
    include_current: bool
    inputs: np.ndarray
    current: np.ndarray
    targets: np.ndarray

    @property
    def P_effective(self) -> int:
        return self.inputs.shape[1]

    @property
    def increments(self) -> np.ndarray:
        return self.targets - self.current


def build_samples(series: TimeSeries, M: int, arch: Arch, include_current: bool = False,
                  component: int = 0) -> SampleSet:
    """Build samples inside each gap-free segment; no window spans a gap."""
    xs, cur, tgt = [], [], []
    for seg in series.segments:
        L = seg.shape[0]
        if arch is Arch.DELAYED_SCALAR:
            if L <= M:
                continue
            y = seg[:, component]
            n = np.arange(M - 1, L - 1)
            lags = np.arange(0 if include_current else 1, M)
            xs.append(y[n[None, :] - lags[:, None]])
            cur.append(y[n][None, :])
            tgt.append(y[n + 1][None, :])
        else:
            if seg.shape[1] != M:
                raise ValueError(f"vector machine with M={M} needs {M}-dimensional records")
            if L < 2:
                continue
            xs.append(seg[:-1].T)
            cur.append(seg[:-1].T)
            tgt.append(seg[1:].T)
    if not xs:
        raise NoUsableSamples("no segment is long enough to form a training sample")
    cat = lambda parts: np.ascontiguousarray(np.concatenate(parts, axis=1))
    return SampleSet(arch, M, include_current, cat(xs), cat(cur), cat(tgt))


def _check_match(m: Machine, s: SampleSet):
    if m.arch is not s.arch or m.M != s.M or (
            m.arch is Arch.DELAYED_SCALAR and m.include_current != s.include_current):
        raise ValueError("machine and sample set disagree on architecture")


def _u2(m: Machine) -> np.ndarray:
    return m.u.reshape(m.N, m.n_outputs)


def full_cost(m: Machine, s: SampleSet) -> float:
    """RMS one-step residual over all samples (summed over output components)."""
    _check_match(m, s)
    pre = m.v @ s.inputs - m.b[:, None]
    hidden = _u2(m).T @ m.f(m.beta[:, None] * pre)
    resid = s.increments - m.tau * hidden
    lam = float(np.sqrt(np.sum(resid * resid) / s.P_effective))
    if not np.isfinite(lam):
        raise EvaluationDiverged("cost is not finite")
    return lam


EARLY_BLOCK = 64
EARLY_MARGIN = 1e-9


@numba.njit(cache=True, fastmath=FASTMATH)
def _attempts(code, tau, U, beta, V, bvec, cu, cbeta, cv, cb, X, inc, A, F, S,
              sse_k, thr, idx, prop, count, stop_sse, a_new, f_new, acc, log):
    """Run ``count`` attempts in place. Returns (attempts_done, n_accepted)."""
    N, n_out = U.shape
    K = V.shape[1]
    P = X.shape[1]
    n_u = N * n_out
    n_b0 = n_u + N
    n_v0 = n_b0 + N * K
    n_acc = 0
    for t in range(count):
        # partial sums only grow, so a proposal already over the threshold
        # (plus a margin far above rounding noise) can stop early
        lim = thr[0] * (1.0 + EARLY_MARGIN)
        p = idx[t]
        r = 2.0 * prop[t] - 1.0
        if p < n_u:
            i = p // n_out
            k = p % n_out
            du = r * cu - U[i, k]
            base = 0.0
            for kk in range(n_out):
                if kk != k:
                    base += sse_k[kk]
            s = 0.0
            n0 = 0
            while n0 < P:
                n1 = min(n0 + EARLY_BLOCK, P)
                for n in range(n0, n1):
                    e = inc[k, n] - tau * (S[k, n] + du * F[i, n])
                    s += e * e
                n0 = n1
                if base + s > lim:
                    break
            if n0 < P:
                continue
            total = 0.0
            for kk in range(n_out):
                total += s if kk == k else sse_k[kk]
            if np.isfinite(total) and total <= thr[0]:
                for n in range(P):
                    S[k, n] = S[k, n] + du * F[i, n]
                U[i, k] = r * cu
                sse_k[k] = s
                thr[0] = total
                log[n_acc] = total
                n_acc += 1
                if total <= stop_sse:
                    return t + 1, n_acc
            continue
        kind = 0
        i = 0
        j = 0
        bi = 0.0
        dv = 0.0
        db = 0.0
        if p < n_b0:
            i = p - n_u
            bi = r * cbeta
        elif p < n_v0:
            q = p - n_b0
            i = q // K
            j = q % K
            bi = beta[i]
            kind = 1
            dv = r * cv - V[i, j]
        else:
            i = p - n_v0
            bi = beta[i]
            kind = 2
            db = r * cb - bvec[i]
        for kk in range(n_out):
            acc[kk] = 0.0
        n0 = 0
        while n0 < P:
            n1 = min(n0 + EARLY_BLOCK, P)
            for n in range(n0, n1):
                if kind == 0:
                    a = A[i, n]
                elif kind == 1:
                    a = A[i, n] + dv * X[j, n]
                else:
                    a = A[i, n] - db
                a_new[n] = a
                h = bi * a
                if code == 0:
                    fv = np.exp(-h * h)
                else:
                    fv = h * h * h
                f_new[n] = fv
                d = fv - F[i, n]
                for kk in range(n_out):
                    e = inc[kk, n] - tau * (S[kk, n] + U[i, kk] * d)
                    acc[kk] += e * e
            n0 = n1
            part = 0.0
            for kk in range(n_out):
                part += acc[kk]
            if part > lim:
                break
        if n0 < P:
            continue
        total = 0.0
        for kk in range(n_out):
            total += acc[kk]
        if np.isfinite(total) and total <= thr[0]:
            for n in range(P):
                d = f_new[n] - F[i, n]
                for kk in range(n_out):
                    S[kk, n] = S[kk, n] + U[i, kk] * d
                F[i, n] = f_new[n]
                A[i, n] = a_new[n]
            if kind == 0:
                beta[i] = bi
            elif kind == 1:
                V[i, j] = r * cv
            else:
                bvec[i] = r * cb
            for kk in range(n_out):
                sse_k[kk] = acc[kk]
            thr[0] = total
            log[n_acc] = total
            n_acc += 1
            if total <= stop_sse:
                return t + 1, n_acc
    return count, n_acc


@dataclass(frozen=True)
class MutationResult:
    accepted: bool
    lambda_after: float


class TrainerState:
    """A training chain: the machine being trained, its caches and RNG.

    The machine held here is private to the chain and mutated in place;
    use :meth:`snapshot` for an independent copy.
    """

    def __init__(self, m: Machine, samples: SampleSet, seed=None, refresh_every: int = 1_000_000):
        _check_match(m, samples)
        self.machine = m.copy()
        self.samples = samples
        self.rng = np.random.default_rng(seed)
        self.refresh_every = int(refresh_every)
        self.attempts = 0
        self.accepts = 0
        self.accepted_lambdas: list[np.ndarray] | None = None
        self._u2 = _u2(self.machine)
        self._inc = np.ascontiguousarray(samples.increments)
        P = samples.P_effective
        n_out = self.machine.n_outputs
        self._a_new = np.empty(P)
        self._f_new = np.empty(P)
        self._acc = np.empty(n_out)
        self._idx = np.empty(0, dtype=np.int64)
        self._prop = np.empty(0)
        self._pos = 0
        self._thr = np.empty(1)
        self._recompute()
        self._thr[0] = float(np.sum(self.sse_k))
        if not np.isfinite(self._thr[0]):
            raise EvaluationDiverged("initial cost is not finite")

    def _recompute(self):
        m = self.machine
        self.preact = np.ascontiguousarray(m.v @ self.samples.inputs - m.b[:, None])
        self.fvals = np.ascontiguousarray(m.f(m.beta[:, None] * self.preact))
        self.ssum = np.ascontiguousarray(self._u2.T @ self.fvals)
        resid = self._inc - m.tau * self.ssum
        self.sse_k = np.sum(resid * resid, axis=1)

    @property
    def lam(self) -> float:
        return float(np.sqrt(self._thr[0] / self.samples.P_effective))

    @property
    def residuals(self) -> np.ndarray:
        return self._inc - self.machine.tau * self.ssum

    def refresh(self) -> None:
        """Rebuild all caches from the parameters.

        The acceptance threshold never rises: if rounding makes the rebuilt
        cost a hair larger than the maintained one, the maintained value is
        kept as the bar.
        """
        self._recompute()
        self._thr[0] = min(self._thr[0], float(np.sum(self.sse_k)))

    def record_accepts(self, on: bool = True) -> None:
        """Keep every accepted cost value (see :meth:`accepted_lambda_history`)."""
        self.accepted_lambdas = [] if on else None

    def accepted_lambda_history(self) -> np.ndarray:
        if self.accepted_lambdas is None:
            return np.empty(0)
        sse = np.concatenate(self.accepted_lambdas) if self.accepted_lambdas else np.empty(0)
        return np.sqrt(sse / self.samples.P_effective)

    def _fill(self):
        n_params = self.machine.n_params
        self._idx = self.rng.integers(0, n_params, RNG_BLOCK, dtype=np.int64)
        self._prop = self.rng.random(RNG_BLOCK)
        self._pos = 0

    def run(self, n: int, stop_lambda: float | None = None) -> int:
        """Perform up to ``n`` attempts; returns how many were made."""
        m = self.machine
        b = m.bounds
        stop_sse = -1.0 if stop_lambda is None else stop_lambda ** 2 * self.samples.P_effective
        done = 0
        while done < n:
            if self._pos >= self._idx.size:
                self._fill()
            chunk = min(n - done, self._idx.size - self._pos)
            if self.refresh_every > 0:
                chunk = min(chunk, self.refresh_every - self.attempts % self.refresh_every)
            log = np.empty(chunk)
            k, n_acc = _attempts(
                m.f.code, m.tau, self._u2, m.beta, m.v, m.b, b.c_u, b.c_beta, b.c_v, b.c_b,
                self.samples.inputs, self._inc, self.preact, self.fvals, self.ssum,
                self.sse_k, self._thr, self._idx[self._pos:self._pos + chunk],
                self._prop[self._pos:self._pos + chunk], chunk, stop_sse,
                self._a_new, self._f_new, self._acc, log)
            self._pos += k
            self.attempts += k
            self.accepts += n_acc
            done += k
            if self.accepted_lambdas is not None and n_acc:
                self.accepted_lambdas.append(log[:n_acc].copy())
            if self.refresh_every > 0 and self.attempts % self.refresh_every == 0:
                self.refresh()
            if k < chunk:
                break
        return done

    def snapshot(self) -> "Checkpoint":
        return Checkpoint(self.machine.copy(), self.lam, self.attempts, self.accepts)


def init_trainer(m: Machine, s: SampleSet, seed=None, refresh_every: int = 1_000_000) -> TrainerState:
    return TrainerState(m, s, seed, refresh_every)


def mutate_once(st: TrainerState) -> MutationResult:
    before = st.accepts
    st.run(1)
    return MutationResult(st.accepts > before, st.lam)


@dataclass(frozen=True)
class TrainSchedule:
    """Attempt budget and snapshot spacing.

    With ``dense_every`` set, snapshots are taken every ``dense_every``
    attempts during the first ``dense_until`` attempts, where the cost
    falls fastest, and every ``checkpoint_every`` afterwards.
    """

    checkpoint_every: int = 200_000
    max_attempts: int = 20_000_000
    stop_lambda: float | None = None
    dense_every: int | None = None
    dense_until: int = 0

    def __post_init__(self):
        if self.checkpoint_every < 1 or self.max_attempts < 0:
            raise ValueError("need checkpoint_every >= 1 and max_attempts >= 0")
        if self.dense_every is not None and self.dense_every < 1:
            raise ValueError("dense_every must be >= 1")

    def next_span(self, elapsed: int) -> int:
        if self.dense_every is not None and elapsed < self.dense_until:
            return min(self.dense_every, self.dense_until - elapsed)
        return self.checkpoint_every

    def digest(self) -> str:
        text = repr(sorted(asdict(self).items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class Checkpoint:
    machine: Machine
    lam: float
    attempts: int
    accepts: int
    meta: dict = field(default_factory=dict)


def train(st: TrainerState, sched: TrainSchedule,
          on_checkpoint: Callable[[Checkpoint], None] | None = None) -> list[Checkpoint]:
    """Run until ``max_attempts`` or ``stop_lambda``; snapshot every ``checkpoint_every``.

    A final checkpoint is always emitted, so ``max_attempts=0`` yields just
    the initial state.
    """
    out: list[Checkpoint] = []

    def emit():
        ck = st.snapshot()
        ck.meta["schedule"] = sched.digest()
        out.append(ck)
        if on_checkpoint is not None:
            on_checkpoint(ck)

    start = st.attempts
    target = start + sched.max_attempts
    while st.attempts < target:
        if sched.stop_lambda is not None and st.lam <= sched.stop_lambda:
            break
        want = min(sched.next_span(st.attempts - start), target - st.attempts)
        st.run(want, sched.stop_lambda)
        emit()
    if not out or out[-1].attempts != st.attempts:
        emit()
    return out


def coefficient_trace(checkpoints, output_dim: int = 0):
    from .analysis import expand_cubic_coefficients

    return [expand_cubic_coefficients(ck.machine, output_dim) for ck in checkpoints]


# -- checkpoint files --------------------------------------------------------

def save_checkpoint(ck: Checkpoint, path: str | os.PathLike) -> None:
    meta = {"lambda": repr(ck.lam), "attempts": ck.attempts, "accepts": ck.accepts,
            "schedule": ck.meta.get("schedule", "none")}
    with open(path, "w") as fh:
        fh.write(dumps_machine(ck.machine, meta))


def load_checkpoint(path: str | os.PathLike) -> Checkpoint:
    m, meta = load_machine(path)
    lam = float(meta.get("lambda", "nan"))
    ck = Checkpoint(m, lam, int(meta.get("attempts", 0)), int(meta.get("accepts", 0)))
    if "schedule" in meta:
        ck.meta["schedule"] = meta["schedule"]
    return ck

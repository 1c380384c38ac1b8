"""Bounded three-layer learning machines and their closed-loop evolution.

Two architectures share one parameter layout:

* ``DELAYED_SCALAR``: ``phi(n+1) = phi(n) + tau * sum_i u_i f(beta_i (sum_j v_ij phi(n-j) - b_i))``
  with the hidden layer reading delays ``j = 1..M-1`` (``j = 0..M-1`` when
  ``include_current`` is set).
* ``VECTOR``: ``x(n+1) = x(n) + tau * U^T f(beta * (V x(n) - b))`` with a shared
  hidden layer and an ``N x M`` output matrix ``U``.
"""

from __future__ import annotations

import enum
import io
import os
from dataclasses import dataclass, replace

import numba
import numpy as np

from .errors import EvaluationDiverged, ParseError
from .timeseries import TimeSeries

FORMAT_TAG = "mcdyn-machine"
FORMAT_VERSION = "v1"


class Arch(enum.Enum):
    DELAYED_SCALAR = "delayed_scalar"
    VECTOR = "vector"


class Transfer(enum.Enum):
    GAUSSIAN_EXP = "gaussian_exp"
    CUBIC = "cubic"

    @property
    def code(self) -> int:
        return 0 if self is Transfer.GAUSSIAN_EXP else 1

    def __call__(self, h):
        if self is Transfer.GAUSSIAN_EXP:
            return np.exp(-np.square(h))
        return h * h * h


@dataclass(frozen=True)
class Bounds:
    """Training control parameters: symmetric bounds per parameter type."""

    c_u: float
    c_beta: float
    c_v: float
    c_b: float

    def __post_init__(self):
        for name in ("c_u", "c_beta", "c_v", "c_b"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @classmethod
    def uniform(cls, c: float) -> "Bounds":
        return cls(c, c, c, c)


@dataclass
class Machine:
    arch: Arch
    M: int
    N: int
    tau: float
    u: np.ndarray
    beta: np.ndarray
    v: np.ndarray
    b: np.ndarray
    bounds: Bounds
    f: Transfer = Transfer.GAUSSIAN_EXP
    include_current: bool = False

    def __post_init__(self):
        if self.N < 1 or self.M < 2 or not self.tau > 0:
            raise ValueError("need N >= 1, M >= 2 and tau > 0")
        for name, shape in self.shapes().items():
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            setattr(self, name, arr)

    @property
    def n_inputs(self) -> int:
        """Width of the hidden layer's input vector."""
        if self.arch is Arch.VECTOR:
            return self.M
        return self.M if self.include_current else self.M - 1

    @property
    def n_outputs(self) -> int:
        return self.M if self.arch is Arch.VECTOR else 1

    def shapes(self) -> dict[str, tuple[int, ...]]:
        u_shape = (self.N, self.M) if self.arch is Arch.VECTOR else (self.N,)
        return {
            "u": u_shape,
            "beta": (self.N,),
            "v": (self.N, self.n_inputs),
            "b": (self.N,),
        }

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(s)) for s in self.shapes().values())

    def copy(self) -> "Machine":
        return replace(
            self, u=self.u.copy(), beta=self.beta.copy(), v=self.v.copy(), b=self.b.copy()
        )

    def bound_violations(self) -> list[str]:
        """Names of parameter arrays holding an entry outside its bound."""
        bad = []
        for name, c in (("u", self.bounds.c_u), ("beta", self.bounds.c_beta),
                        ("v", self.bounds.c_v), ("b", self.bounds.c_b)):
            if np.any(np.abs(getattr(self, name)) > c):
                bad.append(name)
        return bad

    def within_bounds(self) -> bool:
        return not self.bound_violations()


def init_machine(arch: Arch, M: int, N: int, tau: float, bounds: Bounds,
                 f: Transfer = Transfer.GAUSSIAN_EXP, seed=None,
                 include_current: bool = False) -> Machine:
    """Draw every parameter uniformly from ``[-c, c]`` of its type."""
    rng = np.random.default_rng(seed)
    proto = Machine(arch, M, N, tau, *_zeros(arch, M, N, include_current), bounds=bounds,
                    f=f, include_current=include_current)
    shapes = proto.shapes()
    return replace(
        proto,
        u=rng.uniform(-bounds.c_u, bounds.c_u, shapes["u"]),
        beta=rng.uniform(-bounds.c_beta, bounds.c_beta, shapes["beta"]),
        v=rng.uniform(-bounds.c_v, bounds.c_v, shapes["v"]),
        b=rng.uniform(-bounds.c_b, bounds.c_b, shapes["b"]),
    )


def _zeros(arch, M, N, include_current):
    k = M if (arch is Arch.VECTOR or include_current) else M - 1
    u = np.zeros((N, M)) if arch is Arch.VECTOR else np.zeros(N)
    return u, np.zeros(N), np.zeros((N, k)), np.zeros(N)


def hidden_inputs(m: Machine, window: np.ndarray) -> np.ndarray:
    """Inputs seen by the hidden layer for a window ``phi(n-M+1..n)``."""
    rev = np.asarray(window, dtype=float)[::-1]
    return rev if m.include_current else rev[1:]


def step_delayed(m: Machine, window) -> float:
    if m.arch is not Arch.DELAYED_SCALAR:
        raise ValueError("step_delayed needs a DELAYED_SCALAR machine")
    window = np.asarray(window, dtype=float).ravel()
    if window.size != m.M:
        raise ValueError(f"window must hold M={m.M} values")
    h = m.beta * (m.v @ hidden_inputs(m, window) - m.b)
    out = window[-1] + m.tau * float(m.u @ m.f(h))
    if not np.isfinite(out):
        raise EvaluationDiverged("non-finite machine output")
    return out


def step_vector(m: Machine, state) -> np.ndarray:
    if m.arch is not Arch.VECTOR:
        raise ValueError("step_vector needs a VECTOR machine")
    state = np.asarray(state, dtype=float).ravel()
    if state.size != m.M:
        raise ValueError(f"state must have length M={m.M}")
    h = m.beta * (m.v @ state - m.b)
    out = state + m.tau * (m.f(h) @ m.u)
    if not np.all(np.isfinite(out)):
        raise EvaluationDiverged("non-finite machine output")
    return out


@dataclass(frozen=True)
class FreeRunConfig:
    """Closed-loop run lengths in machine steps."""

    n_discard: int = 20000
    n_record: int = 50000
    amplitude_guard: float = 10.0

    def __post_init__(self):
        if self.n_record < 1 or self.n_discard < 0:
            raise ValueError("need n_record >= 1 and n_discard >= 0")
        if not self.amplitude_guard > 1:
            raise ValueError("amplitude_guard must exceed 1")


@dataclass(frozen=True)
class Diverged:
    """A free run whose amplitude left the guard band at ``step``."""

    step: int


@numba.njit(cache=True)
def _transfer(h, code):
    if code == 0:
        return np.exp(-h * h)
    return h * h * h


# reassociation only; nan/inf semantics stay intact for the divergence checks
FASTMATH = {"reassoc", "nsz", "arcp", "contract", "afn"}


@numba.njit(cache=True, fastmath=FASTMATH)
def _free_run_delayed(Vrev, u, beta, b, tau, code, offset, window, n_total, limit):
    # Vrev holds v with columns reversed so the dot product walks hist forwards
    N, K = Vrev.shape
    M = window.size
    hist = np.empty(M + n_total)
    hist[:M] = window
    for s in range(n_total):
        n = M - 1 + s
        start = n - offset - (K - 1)
        acc = 0.0
        for i in range(N):
            a = 0.0
            for c in range(K):
                a += Vrev[i, c] * hist[start + c]
            acc += u[i] * _transfer(beta[i] * (a - b[i]), code)
        nxt = hist[n] + tau * acc
        if not np.isfinite(nxt) or abs(nxt) > limit:
            return hist, s + 1
        hist[n + 1] = nxt
    return hist, -1


@numba.njit(cache=True, fastmath=FASTMATH)
def _free_run_vector(V, U, beta, b, tau, code, state, n_total, limit):
    N, M = V.shape
    out = np.empty((n_total + 1, M))
    out[0] = state
    fv = np.empty(N)
    for s in range(n_total):
        x = out[s]
        for i in range(N):
            a = 0.0
            for j in range(M):
                a += V[i, j] * x[j]
            fv[i] = _transfer(beta[i] * (a - b[i]), code)
        for k in range(M):
            acc = 0.0
            for i in range(N):
                acc += U[i, k] * fv[i]
            nk = x[k] + tau * acc
            if not np.isfinite(nk) or abs(nk) > limit:
                return out, s + 1
            out[s + 1, k] = nk
    return out, -1


def free_run(m: Machine, seed_data: TimeSeries, cfg: FreeRunConfig = FreeRunConfig(),
             reference_amplitude: float | None = None) -> TimeSeries | Diverged:
    """Evolve the machine on its own output after a teacher-supplied start.

    Only the last ``M`` records (last record for ``VECTOR``) of ``seed_data``
    are used. The run is abandoned as :class:`Diverged` once any value
    exceeds ``amplitude_guard * reference_amplitude``; the reference
    defaults to ``max|seed_data|``.
    """
    seg = seed_data.segments[-1]
    ref = seed_data.max_abs() if reference_amplitude is None else reference_amplitude
    limit = cfg.amplitude_guard * max(ref, np.finfo(float).tiny)
    n_total = cfg.n_discard + cfg.n_record
    t_start = seed_data.t0[-1] + seed_data.tau * (seg.shape[0] - 1)
    if m.arch is Arch.DELAYED_SCALAR:
        if seg.shape[0] < m.M:
            raise ValueError(f"seed segment needs at least M={m.M} records")
        window = np.ascontiguousarray(seg[-m.M:, 0])
        offset = 0 if m.include_current else 1
        vrev = np.ascontiguousarray(m.v[:, ::-1])
        hist, bad = _free_run_delayed(vrev, m.u, m.beta, m.b, m.tau, m.f.code, offset,
                                      window, n_total, limit)
        if bad >= 0:
            return Diverged(int(bad))
        rec = hist[m.M + cfg.n_discard:]
    else:
        if seg.shape[1] != m.M:
            raise ValueError("seed data dimension does not match the machine")
        state = np.ascontiguousarray(seg[-1], dtype=float)
        out, bad = _free_run_vector(m.v, m.u, m.beta, m.b, m.tau, m.f.code, state, n_total, limit)
        if bad >= 0:
            return Diverged(int(bad))
        rec = out[1 + cfg.n_discard:]
    t0 = t_start + m.tau * (cfg.n_discard + 1)
    return TimeSeries.single(rec, m.tau, t0)


def predict(m: Machine, seed_data: TimeSeries, horizon: int) -> np.ndarray:
    """The first ``horizon`` closed-loop outputs after the seed, no guard."""
    if horizon <= 0:
        return np.empty((0, m.n_outputs))
    res = free_run(m, seed_data, FreeRunConfig(0, horizon, np.inf),
                   reference_amplitude=1.0)
    if isinstance(res, Diverged):
        raise EvaluationDiverged(f"prediction became non-finite at step {res.step}")
    return res.values


# -- serialization ---------------------------------------------------------

def _header(m: Machine) -> str:
    b = m.bounds
    return (f"{FORMAT_TAG} {FORMAT_VERSION} arch={m.arch.value} M={m.M} N={m.N} "
            f"tau={m.tau!r} f={m.f.value} c_u={b.c_u!r} c_beta={b.c_beta!r} "
            f"c_v={b.c_v!r} c_b={b.c_b!r} include_current={int(m.include_current)}")


def dumps_machine(m: Machine, meta: dict | None = None) -> str:
    """Plain-text form: optional ``# key=value`` line, header, one value per line."""
    buf = io.StringIO()
    if meta:
        buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    buf.write(_header(m) + "\n")
    flat = np.concatenate([m.u.ravel(), m.beta, m.v.ravel(), m.b])
    buf.write("\n".join(format(x, ".17g") for x in flat.tolist()))
    buf.write("\n")
    return buf.getvalue()


def save_machine(m: Machine, path: str | os.PathLike, meta: dict | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_machine(m, meta))


def loads_machine(text: str) -> tuple[Machine, dict]:
    lines = text.splitlines()
    meta: dict = {}
    pos = 0
    while pos < len(lines) and lines[pos].startswith("#"):
        meta.update(_parse_pairs(lines[pos][1:].split(), pos + 1))
        pos += 1
    if pos >= len(lines):
        raise ParseError("missing machine header", pos + 1)
    head = lines[pos].split()
    if len(head) < 2 or head[0] != FORMAT_TAG or head[1] != FORMAT_VERSION:
        raise ParseError(f"not a {FORMAT_TAG} {FORMAT_VERSION} file", pos + 1)
    kv = _parse_pairs(head[2:], pos + 1)
    try:
        arch = Arch(kv["arch"])
        M, N = int(kv["M"]), int(kv["N"])
        bounds = Bounds(float(kv["c_u"]), float(kv["c_beta"]), float(kv["c_v"]), float(kv["c_b"]))
        f = Transfer(kv["f"])
        tau = float(kv["tau"])
        inc = bool(int(kv.get("include_current", "0")))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad machine header: {exc}", pos + 1) from exc
    proto = Machine(arch, M, N, tau, *_zeros(arch, M, N, inc), bounds=bounds, f=f,
                    include_current=inc)
    body = [ln for ln in lines[pos + 1:] if ln.strip()]
    if len(body) != proto.n_params:
        raise ParseError(f"expected {proto.n_params} parameters, found {len(body)}", pos + 2)
    try:
        flat = np.array([float(x) for x in body])
    except ValueError as exc:
        raise ParseError(f"bad parameter value: {exc}") from exc
    arrays = {}
    start = 0
    for name, shape in proto.shapes().items():
        size = int(np.prod(shape))
        arrays[name] = flat[start:start + size].reshape(shape)
        start += size
    return replace(proto, **arrays), meta


def load_machine(path: str | os.PathLike) -> tuple[Machine, dict]:
    with open(path) as fh:
        return loads_machine(fh.read())


def _parse_pairs(tokens, line):
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ParseError(f"expected key=value, got {tok!r}", line)
        k, v = tok.split("=", 1)
        out[k] = v
    return out

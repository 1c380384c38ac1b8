import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcdyn.errors import EvaluationDiverged, ParseError
from mcdyn.machine import (Arch, Bounds, Diverged, FreeRunConfig, Machine, Transfer, dumps_machine,
                           free_run, init_machine, load_machine, loads_machine, predict,
                           save_machine, step_delayed, step_vector)
from mcdyn.timeseries import TimeSeries

from conftest import small_machine


def naive_delayed(m, window):
    """Loop-by-loop evaluation of the delayed map."""
    M = len(window)
    phi = lambda j: window[M - 1 - j]  # phi(n - j)
    j0 = 0 if m.include_current else 1
    total = 0.0
    for i in range(m.N):
        a = 0.0
        for j in range(j0, M):
            a += m.v[i][j - j0] * phi(j)
        h = m.beta[i] * (a - m.b[i])
        f = math.exp(-h * h) if m.f is Transfer.GAUSSIAN_EXP else h ** 3
        total += m.u[i] * f
    return phi(0) + m.tau * total


def naive_vector(m, state):
    out = list(state)
    for k in range(m.M):
        total = 0.0
        for i in range(m.N):
            a = sum(m.v[i][j] * state[j] for j in range(m.M))
            h = m.beta[i] * (a - m.b[i])
            f = math.exp(-h * h) if m.f is Transfer.GAUSSIAN_EXP else h ** 3
            total += m.u[i][k] * f
        out[k] = state[k] + m.tau * total
    return np.array(out)


def zero_u(m):
    m = m.copy()
    m.u[...] = 0.0
    return m


def test_transfer_functions():
    assert Transfer.GAUSSIAN_EXP(0.0) == 1.0
    assert Transfer.GAUSSIAN_EXP(2.0) == pytest.approx(math.exp(-4))
    assert Transfer.CUBIC(-2.0) == -8.0


def test_bounds_must_be_positive():
    with pytest.raises(ValueError):
        Bounds(1.0, 0.0, 1.0, 1.0)


def test_machine_rejects_bad_shapes():
    with pytest.raises(ValueError):
        Machine(Arch.DELAYED_SCALAR, 4, 2, 0.01, np.zeros(2), np.zeros(2), np.zeros((2, 4)),
                np.zeros(2), Bounds.uniform(1))


def test_parameter_count_eq1_structure():
    m = init_machine(Arch.DELAYED_SCALAR, 60, 3000, 0.01, Bounds.uniform(1.0), seed=0)
    assert m.n_params == 3000 * (1 + 1 + 59 + 1) == 186000
    assert m.v.shape == (3000, 59)


def test_vector_parameter_shapes():
    m = init_machine(Arch.VECTOR, 3, 10, 0.01, Bounds.uniform(1.0), seed=0)
    assert m.u.shape == (10, 3) and m.v.shape == (10, 3)


def test_init_within_bounds_and_fills_range():
    b = Bounds(0.2, 0.5, 2.0, 15.0)
    m = init_machine(Arch.DELAYED_SCALAR, 10, 5000, 0.01, b, seed=3)
    assert m.within_bounds()
    assert np.abs(m.u).max() > 0.99 * 0.2
    assert np.abs(m.b).max() > 0.99 * 15.0


def test_init_is_deterministic():
    a = small_machine(seed=9)
    b = small_machine(seed=9)
    for name in ("u", "beta", "v", "b"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_bound_violation_reported():
    m = small_machine()
    m.u[0] = 10.0
    assert m.bound_violations() == ["u"]


def test_zero_u_is_identity_delayed():
    m = zero_u(small_machine())
    assert step_delayed(m, [1, 2, 3, 4, 5, 6.5]) == 6.5


def test_single_cubic_neuron_with_zero_v():
    m = Machine(Arch.DELAYED_SCALAR, 3, 1, 0.01, np.ones(1), np.ones(1), np.zeros((1, 2)),
                np.zeros(1), Bounds.uniform(1), Transfer.CUBIC)
    assert step_delayed(m, [0.3, -0.2, 0.7]) == 0.7


def test_current_value_not_in_hidden_layer():
    m = small_machine(M=4)
    w1 = np.array([1.0, 2.0, 3.0, 4.0])
    w2 = np.array([1.0, 2.0, 3.0, 9.0])
    # only the identity term sees phi(n)
    assert step_delayed(m, w2) - step_delayed(m, w1) == pytest.approx(5.0, abs=1e-14)


def test_include_current_adds_column():
    m = small_machine(M=4, include_current=True)
    assert m.v.shape == (m.N, 4)
    w = np.array([0.1, 0.2, 0.3, 0.4])
    assert step_delayed(m, w) == pytest.approx(naive_delayed(m, w), rel=1e-12)


@pytest.mark.parametrize("f", list(Transfer))
def test_delayed_matches_naive_on_100_machines(f, rng):
    for seed in range(100):
        m = small_machine(M=7, N=12, f=f, seed=seed)
        w = rng.uniform(-2, 2, 7)
        assert step_delayed(m, w) == pytest.approx(naive_delayed(m, w), rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("f", list(Transfer))
def test_vector_matches_naive_on_100_machines(f, rng):
    for seed in range(100):
        m = small_machine(Arch.VECTOR, M=3, N=12, f=f, seed=seed)
        s = rng.uniform(-2, 2, 3)
        assert np.allclose(step_vector(m, s), naive_vector(m, s), rtol=1e-12, atol=1e-14)


def test_vector_hand_evaluation():
    m = Machine(Arch.VECTOR, 3, 1, 0.01, np.array([[1.0, 0, 0]]), np.ones(1),
                np.array([[1.0, 0, 0]]), np.zeros(1), Bounds.uniform(1), Transfer.CUBIC)
    assert np.allclose(step_vector(m, [2, 0, 0]), [2 + 0.01 * 8, 0, 0], rtol=0, atol=1e-15)


def test_vector_zero_u_identity():
    m = zero_u(small_machine(Arch.VECTOR, M=3))
    assert np.array_equal(step_vector(m, [1.0, -2.0, 3.0]), [1.0, -2.0, 3.0])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_step_non_finite_raises():
    m = small_machine(f=Transfer.CUBIC)
    with pytest.raises(EvaluationDiverged):
        step_delayed(m, [1e300] * 6)


def test_step_checks_arch_and_size():
    with pytest.raises(ValueError):
        step_vector(small_machine(), [1.0, 2.0])
    with pytest.raises(ValueError):
        step_delayed(small_machine(), [1.0, 2.0])


def test_free_run_zero_u_constant_continuation():
    m = zero_u(small_machine())
    seed = TimeSeries.single(np.linspace(0, 1, 6), 0.01)
    out = free_run(m, seed, FreeRunConfig(5, 20))
    assert np.array_equal(out.values[:, 0], np.full(20, 1.0))


@given(st.floats(-5, 5), st.integers(0, 30), st.integers(1, 30))
def test_identity_machine_free_run_exact(c, n_discard, n_record):
    m = zero_u(small_machine())
    seed = TimeSeries.single(np.r_[np.zeros(5), c], 0.01)
    out = free_run(m, seed, FreeRunConfig(n_discard, n_record))
    assert np.all(out.values == c)


def test_free_run_matches_repeated_steps():
    m = small_machine(M=5, N=10, seed=4)
    seed = TimeSeries.single(np.array([0.1, 0.3, -0.2, 0.5, 0.4]), 0.01)
    out = free_run(m, seed, FreeRunConfig(3, 7), reference_amplitude=1e6)
    w = list(seed.values[:, 0])
    for _ in range(10):
        w.append(step_delayed(m, w[-5:]))
    assert np.allclose(out.values[:, 0], w[-7:], rtol=1e-12)


def test_free_run_vector_matches_steps():
    m = small_machine(Arch.VECTOR, M=3, N=10, seed=4)
    seed = TimeSeries.single(np.array([[0.1, 0.3, -0.2]]), 0.01)
    out = free_run(m, seed, FreeRunConfig(2, 4), reference_amplitude=1e6)
    s = seed.values[0]
    ref = []
    for _ in range(6):
        s = step_vector(m, s)
        ref.append(s)
    assert np.allclose(out.values, ref[2:], rtol=1e-12)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=10))
def test_free_run_ignores_records_before_window(prefix):
    m = small_machine(M=5, seed=2)
    tail = np.array([0.2, -0.1, 0.4, 0.3, 0.0])
    cfg = FreeRunConfig(10, 20)
    a = free_run(m, TimeSeries.single(tail, 0.01), cfg, reference_amplitude=1.0)
    b = free_run(m, TimeSeries.single(np.r_[prefix, tail], 0.01), cfg, reference_amplitude=1.0)
    assert np.array_equal(a.values, b.values)


def test_free_run_times_follow_seed():
    m = zero_u(small_machine(M=3))
    seed = TimeSeries.single(np.zeros(3), 0.01, t0=10.0)
    out = free_run(m, seed, FreeRunConfig(4, 2))
    # last seed record at 10.02, four discarded steps, first kept is step five
    assert out.times(0)[0] == pytest.approx(10.02 + 0.05)


def test_free_run_guard_catches_expanding_map():
    # one cubic neuron reading phi(n-1) with a large gain grows without bound
    m = Machine(Arch.DELAYED_SCALAR, 2, 1, 0.1, np.array([5.0]), np.ones(1),
                np.array([[1.0]]), np.zeros(1), Bounds.uniform(5), Transfer.CUBIC)
    res = free_run(m, TimeSeries.single([1.0, 1.0], 0.1), FreeRunConfig(100, 100))
    assert isinstance(res, Diverged)
    assert res.step < 20


def test_free_run_short_seed_rejected():
    with pytest.raises(ValueError):
        free_run(small_machine(M=6), TimeSeries.single(np.zeros(3), 0.01))


def test_predict_zero_horizon():
    assert predict(small_machine(), TimeSeries.single(np.zeros(6), 0.01), 0).shape == (0, 1)


def test_predict_zero_u_constant():
    out = predict(zero_u(small_machine()), TimeSeries.single(np.arange(6.0), 0.01), 4)
    assert np.array_equal(out[:, 0], [5.0] * 4)


@pytest.mark.parametrize("arch", list(Arch))
def test_serialization_round_trip_exact(arch, tmp_path):
    m = small_machine(arch, M=3 if arch is Arch.VECTOR else 5, seed=11, f=Transfer.CUBIC)
    path = tmp_path / "m.txt"
    save_machine(m, path, meta={"lambda": 0.5})
    back, meta = load_machine(path)
    assert meta == {"lambda": "0.5"}
    assert back.arch is arch and back.f is Transfer.CUBIC and back.bounds == m.bounds
    for name in ("u", "beta", "v", "b"):
        assert np.array_equal(getattr(back, name), getattr(m, name))


def test_serialized_header_and_order():
    m = Machine(Arch.DELAYED_SCALAR, 3, 1, 0.01, np.array([0.1]), np.array([0.2]),
                np.array([[0.3, 0.4]]), np.array([0.5]), Bounds.uniform(1))
    lines = dumps_machine(m).splitlines()
    assert lines[0].startswith("mcdyn-machine v1 arch=delayed_scalar M=3 N=1 tau=0.01")
    assert [float(x) for x in lines[1:]] == [0.1, 0.2, 0.3, 0.4, 0.5]


def test_loads_rejects_truncated_body():
    text = dumps_machine(small_machine())
    with pytest.raises(ParseError):
        loads_machine("\n".join(text.splitlines()[:-1]))


def test_loads_rejects_foreign_header():
    with pytest.raises(ParseError, match="line 1"):
        loads_machine("something else\n1\n")

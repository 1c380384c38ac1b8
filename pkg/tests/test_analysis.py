import itertools

import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from mcdyn import analysis as an
from mcdyn.analysis import (AxisLabel, BifurcationDiagram, DiagramRow, Direction, Interp,
                            SectionConfig)
from mcdyn.errors import EmptyInput, TooShort, WrongArchitecture
from mcdyn.machine import Arch, Bounds, FreeRunConfig, Machine, Transfer
from mcdyn.timeseries import TimeSeries
from mcdyn.trainer import Checkpoint

from conftest import small_machine


def sampled(fn, tau, t_end, t0=0.0):
    t = t0 + np.arange(int(round((t_end - t0) / tau)) + 1) * tau
    return TimeSeries.single(fn(t), tau, t0)


def sine(t):
    return np.sin(2 * np.pi * t)


# -- crossings -----------------------------------------------------------------

def test_sine_crossings_from_above():
    tc = an.find_crossings(sampled(sine, 0.01, 5.0), SectionConfig(c=0.0))
    assert np.allclose(tc, [0.5, 1.5, 2.5, 3.5, 4.5], atol=1e-3)


def test_sine_crossings_from_below():
    cfg = SectionConfig(c=0.5, direction=Direction.FROM_BELOW)
    tc = an.find_crossings(sampled(sine, 0.01, 3.0), cfg)
    assert np.allclose(tc, [1 / 12, 13 / 12, 25 / 12], atol=1e-3)


def test_constant_series_has_no_crossings():
    ts = TimeSeries.single(np.full(100, 3.0), 0.01)
    assert an.find_crossings(ts, SectionConfig(c=3.0)).size == 0
    assert an.find_crossings(ts, SectionConfig(c=1.0)).size == 0


def test_grazing_contact_not_counted():
    ts = TimeSeries.single(np.array([2.0, 1.0, 0.0, 1.0, 2.0, 0.0, -1.0]), 1.0)
    tc = an.find_crossings(ts, SectionConfig(c=0.0))
    # the touch at index 2 returns upward; only the 2 -> 0 -> -1 descent crosses
    assert tc.tolist() == [5.0]


def test_touch_then_through_counted_once():
    ts = TimeSeries.single(np.array([1.0, 0.0, -1.0, 1.0]), 1.0)
    assert an.find_crossings(ts, SectionConfig(c=0.0)).tolist() == [1.0]


@pytest.mark.parametrize("interp", list(Interp))
def test_crossings_strictly_increasing(interp):
    ts = sampled(lambda t: np.sin(2 * np.pi * t) + 0.4 * np.sin(7 * t), 0.01, 20)
    tc = an.find_crossings(ts, SectionConfig(c=0.1, interp=interp))
    assert np.all(np.diff(tc) > 0)


def test_linear_crossing_error_is_second_order():
    # incommensurate frequency so the crossings sample every grid offset
    f = 1 / 1.2345678
    c = 0.3
    def mean_err(tau):
        ts = sampled(lambda t: np.sin(2 * np.pi * f * t), tau, 300.0)
        tc = an.find_crossings(ts, SectionConfig(c=c))
        k = np.round(tc * f - (0.5 - np.arcsin(c) / (2 * np.pi)))
        exact = (k + 0.5 - np.arcsin(c) / (2 * np.pi)) / f
        return np.mean(np.abs(tc - exact))

    ratio = mean_err(0.02) / mean_err(0.01)
    assert 3.5 < ratio < 4.5


def test_cubic_crossing_much_more_accurate():
    ts = sampled(sine, 0.01, 10.0, t0=0.0123)
    exact = np.arange(10) + (0.5 - np.arcsin(0.3) / (2 * np.pi))
    lin = an.find_crossings(ts, SectionConfig(c=0.3))
    cub = an.find_crossings(ts, SectionConfig(c=0.3, interp=Interp.CUBIC))
    assert np.max(np.abs(cub - exact)) < 1e-2 * np.max(np.abs(lin - exact))


@given(st.floats(-0.9, 0.9), st.floats(0.0, 1.0))
def test_zero_delay_section_returns_level(c, phase):
    ts = sampled(lambda t: np.sin(2 * np.pi * t + phase) + 0.2 * np.cos(3 * t), 0.01, 10)
    vals = an.section_points(ts, SectionConfig(c=c, T=0.0))
    assert vals.size > 0
    assert np.max(np.abs(vals - c)) <= 1e-6


def test_out_of_span_delays_dropped():
    ts = sampled(sine, 0.01, 2.0)
    vals = an.section_points(ts, SectionConfig(c=0.0, T=0.6))
    assert vals.size == 1  # the crossing at 0.5 has no record at -0.1


def test_period_one_sinusoid_single_tight_cluster():
    ts = sampled(sine, 0.01, 50.0)
    cl = an.cluster_periods(an.section_points(ts, SectionConfig(c=0.2, T=0.1)))
    assert cl.count == 1 and cl.max_width < 1e-4


def test_multi_segment_series_rejected():
    ts = TimeSeries(0.01, (np.zeros(5), np.zeros(5)), (0.0, 1.0))
    with pytest.raises(ValueError):
        an.find_crossings(ts, SectionConfig())


# -- section map -------------------------------------------------------------

def test_section_map_period_one_single_cluster():
    pairs = an.section_map(sampled(sine, 0.01, 20.0), 0.0, 0.1, 0.2)
    assert pairs.shape[1] == 2 and pairs.shape[0] >= 18
    assert np.ptp(pairs, axis=0).max() < 1e-3


def test_section_map_skips_early_crossings():
    pairs = an.section_map(sampled(sine, 0.01, 3.0), 0.0, 0.3, 0.6)
    assert pairs.shape[0] == 2  # crossing at 0.5 lacks the t-0.6 record


def test_section_map_two_tone_traces_closed_curve():
    f0 = 1.0
    f1 = f0 / 0.618
    fn = lambda t: np.sin(2 * np.pi * f0 * t) + 0.3 * np.sin(2 * np.pi * f1 * t)
    ts = sampled(fn, 0.005, 400.0)
    pairs = an.section_map(ts, 0.0, 0.1, 0.2, interp=Interp.CUBIC)
    # the exact invariant curve: crossings at phase th0, second tone phase th1
    # solve sin(th0) + 0.3 sin(th1) = 0 on the descending branch, sample densely
    th1 = np.linspace(0, 2 * np.pi, 4000, endpoint=False)
    t0 = (np.pi - np.arcsin(-0.3 * np.sin(th1))) / (2 * np.pi * f0)
    ph1 = th1 - 2 * np.pi * f1 * t0
    curve = np.column_stack([
        fn(t0 - 0.1) - 0.3 * np.sin(2 * np.pi * f1 * (t0 - 0.1)) + 0.3 * np.sin(2 * np.pi * f1 * (t0 - 0.1) + ph1),
        fn(t0 - 0.2) - 0.3 * np.sin(2 * np.pi * f1 * (t0 - 0.2)) + 0.3 * np.sin(2 * np.pi * f1 * (t0 - 0.2) + ph1),
    ])
    d = np.sqrt(((pairs[:, None, :] - curve[None, :, :]) ** 2).sum(-1)).min(1)
    assert d.max() < 5e-3
    # the points spread around the loop rather than collapsing
    assert np.ptp(pairs[:, 0]) > 0.3


# -- clustering ----------------------------------------------------------------

def test_two_clusters_example():
    cl = an.cluster_periods([1.0, 1.001, 5.0, 5.002], tol=0.05)
    assert cl.count == 2
    assert np.allclose(cl.centers, [1.0005, 5.001])


def test_all_equal_single_cluster():
    cl = an.cluster_periods([2.5] * 7)
    assert cl.count == 1 and cl.max_width == 0.0


def test_empty_values_raise():
    with pytest.raises(EmptyInput):
        an.cluster_periods([])


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=40), st.floats(0.01, 10),
       st.randoms(use_true_random=False))
def test_clustering_permutation_invariant(vals, tol, rnd):
    shuffled = vals[:]
    rnd.shuffle(shuffled)
    assert an.cluster_periods(vals, tol).count == an.cluster_periods(shuffled, tol).count


@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=40), st.integers(1, 50),
       st.sampled_from([0.5, 2.0, 4.0, 0.25]))
def test_clustering_scale_covariant(ints, tol, k):
    # power-of-two scale factors keep every gap comparison exact
    vals = np.array(ints, dtype=float)
    a = an.cluster_periods(vals, float(tol) + 0.5)
    b = an.cluster_periods(vals * k, (float(tol) + 0.5) * k)
    assert a.count == b.count


# -- diagrams --------------------------------------------------------------

def identity_checkpoint(lam, M=4):
    m = small_machine(M=M, seed=1)
    m.u[...] = 0
    return Checkpoint(m, lam, 0, 0)


def test_machine_bifurcation_one_row_per_checkpoint():
    seed = sampled(sine, 0.01, 0.03)
    cks = [identity_checkpoint(0.5), identity_checkpoint(0.25)]
    d = an.machine_bifurcation(cks, seed, SectionConfig(c=0.0), FreeRunConfig(10, 50))
    assert [r.abscissa for r in d.rows] == [2.0, 4.0]
    assert [r.branch for r in d.rows] == [0, 1]
    assert all(r.label is AxisLabel.INV_LAMBDA for r in d.rows)


def test_identical_checkpoints_identical_rows():
    m = small_machine(M=5, N=30, seed=3)
    cks = [Checkpoint(m.copy(), 0.1, 0, 0) for _ in range(3)]
    seed = sampled(sine, 0.01, 0.04)
    d = an.machine_bifurcation(cks, seed, SectionConfig(c=0.0, T=0.0), FreeRunConfig(100, 2000),
                               reference_amplitude=100.0)
    for r in d.rows[1:]:
        assert np.array_equal(r.points, d.rows[0].points) and r.diverged == d.rows[0].diverged


def test_diverging_checkpoint_flagged():
    bad = Machine(Arch.DELAYED_SCALAR, 2, 1, 0.1, np.array([5.0]), np.ones(1), np.array([[1.0]]),
                  np.zeros(1), Bounds.uniform(5), Transfer.CUBIC)
    seed = TimeSeries.single([1.0, 1.0], 0.1)
    d = an.machine_bifurcation([Checkpoint(bad, 0.3, 0, 0)], seed, SectionConfig(c=0.0),
                               FreeRunConfig(100, 100))
    assert d.rows[0].diverged and d.rows[0].points.size == 0


def test_for_display_dedups_repeated_inverse_lambda():
    rows = [DiagramRow(2.0, AxisLabel.INV_LAMBDA, 0, np.array([1.0])),
            DiagramRow(2.0, AxisLabel.INV_LAMBDA, 1, np.array([1.5])),
            DiagramRow(3.0, AxisLabel.INV_LAMBDA, 2, np.array([2.0]))]
    shown = BifurcationDiagram(rows).for_display()
    assert [r.branch for r in shown.rows] == [1, 2]


def test_diagram_csv_round_trip(tmp_path):
    rows = [DiagramRow(0.5, AxisLabel.PARAMETER, 0, np.array([1.25, -3.5])),
            DiagramRow(0.5, AxisLabel.PARAMETER, 1, np.empty(0), True),
            DiagramRow(0.6, AxisLabel.PARAMETER, None, np.array([0.1]))]
    path = tmp_path / "d.csv"
    BifurcationDiagram(rows).to_csv(path)
    assert path.read_text().splitlines()[0] == "abscissa,label,branch,diverged,point"
    back = BifurcationDiagram.from_csv(path)
    assert len(back) == 3
    for a, b in zip(rows, back.rows):
        assert (a.abscissa, a.label, a.branch, a.diverged) == (b.abscissa, b.label, b.branch,
                                                                b.diverged)
        assert np.array_equal(a.points, b.points)


# -- cubic expansion ---------------------------------------------------------

def cubic_neuron(v, b, u=(1.0, 0, 0), beta=1.0):
    return Machine(Arch.VECTOR, 3, 1, 0.01, np.array([u]), np.array([beta]), np.array([v]),
                   np.array([b]), Bounds.uniform(10), Transfer.CUBIC)


def test_expansion_pure_cube():
    pc = an.expand_cubic_coefficients(cubic_neuron([1.0, 0, 0], 0.0))
    assert pc["x3"] == 1.0
    assert np.count_nonzero(pc.values) == 1


def test_expansion_matches_hand_example():
    pc = an.expand_cubic_coefficients(cubic_neuron([1.0, 1.0, 0], 1.0)).as_dict()
    expect = {"x3": 1, "y3": 1, "x2y": 3, "xy2": 3, "x2": -3, "y2": -3, "xy": -6, "x": 3,
              "y": 3, "1": -1}
    for k, v in pc.items():
        assert v == expect.get(k, 0), k


def test_expansion_matches_symbolic_oracle(rng):
    x, y, z = sympy.symbols("x y z")
    m = small_machine(Arch.VECTOR, M=3, N=5, seed=21, f=Transfer.CUBIC)
    for k in range(3):
        expr = sum(sympy.Float(m.u[i, k]) * (sympy.Float(m.beta[i]) * (
            sympy.Float(m.v[i, 0]) * x + sympy.Float(m.v[i, 1]) * y + sympy.Float(m.v[i, 2]) * z
            - sympy.Float(m.b[i]))) ** 3 for i in range(m.N))
        poly = sympy.Poly(sympy.expand(expr), x, y, z)
        pc = an.expand_cubic_coefficients(m, k)
        for label, expo in an.MONOMIALS:
            want = float(poly.coeff_monomial(x ** expo[0] * y ** expo[1] * z ** expo[2]))
            assert pc[label] == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_expansion_evaluation_equivalent(rng):
    m = small_machine(Arch.VECTOR, M=3, N=50, seed=8, f=Transfer.CUBIC,
                      bounds=Bounds(0.2, 0.2, 1.0, 15.0))
    coeffs = [an.expand_cubic_coefficients(m, k) for k in range(3)]
    for _ in range(100):
        s = rng.uniform(-20, 20, 3)
        hidden = Transfer.CUBIC(m.beta * (m.v @ s - m.b)) @ m.u
        for k in range(3):
            assert coeffs[k].evaluate(s) == pytest.approx(hidden[k], rel=1e-9, abs=1e-9)


def test_expansion_labels():
    assert len(an.MONOMIAL_LABELS) == 20
    assert an.CUBIC_LABELS == ("x3", "y3", "z3", "x2y", "x2z", "xy2", "y2z", "xz2", "yz2", "xyz")
    degs = [sum(e) for _, e in an.MONOMIALS]
    assert degs.count(3) == 10 and degs.count(2) == 6 and degs.count(1) == 3 and degs.count(0) == 1
    assert len({e for _, e in an.MONOMIALS}) == 20


@pytest.mark.parametrize("m", [
    small_machine(Arch.VECTOR, M=3, f=Transfer.GAUSSIAN_EXP),
    small_machine(Arch.DELAYED_SCALAR, M=3, f=Transfer.CUBIC),
    small_machine(Arch.VECTOR, M=4, f=Transfer.CUBIC),
])
def test_expansion_wrong_architecture(m):
    with pytest.raises(WrongArchitecture):
        an.expand_cubic_coefficients(m)


def test_poly_csv(tmp_path):
    pc = an.expand_cubic_coefficients(cubic_neuron([1.0, 1.0, 0], 1.0))
    pc.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "monomial,coefficient" and len(lines) == 21
    assert lines[1] == "x3,1.0"


# -- spectra ---------------------------------------------------------------

def test_single_tone_peak():
    sp = an.periodogram(sampled(lambda t: np.sin(2 * np.pi * 3 * t), 0.01, 100.0))
    assert abs(sp.peaks[0][0] - 3.0) < 0.01


def test_golden_two_tone_ratio():
    f0 = 1.7
    f = f0 / 0.618
    ts = sampled(lambda t: np.sin(2 * np.pi * f0 * t) + 0.5 * np.sin(2 * np.pi * f * t + 1), 0.01,
                 200.0)
    assert abs(an.periodogram(ts).peak_ratio() - 0.618) < 0.01


def test_constant_series_has_no_power():
    sp = an.periodogram(TimeSeries.single(np.full(256, 4.2), 0.01))
    assert np.max(sp.power) < 1e-20


@given(st.integers(16, 600), st.integers(0, 10_000))
def test_parseval(n, seed):
    x = np.random.default_rng(seed).normal(size=n)
    sp = an.periodogram(TimeSeries.single(x, 0.1))
    energy = np.sum(((x - x.mean()) * np.hanning(n)) ** 2)
    assert np.sum(sp.power) == pytest.approx(energy, rel=1e-6)


def test_frequencies_within_nyquist():
    sp = an.periodogram(TimeSeries.single(np.random.default_rng(0).normal(size=101), 0.02))
    assert sp.frequencies.size == sp.power.size
    assert sp.frequencies.max() <= 1 / (2 * 0.02) + 1e-12


def test_short_series_rejected():
    with pytest.raises(TooShort):
        an.periodogram(TimeSeries.single(np.arange(15.0), 0.1))


def test_spectrum_csv(tmp_path):
    sp = an.periodogram(sampled(sine, 0.05, 20.0))
    sp.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "frequency,power" and len(lines) == sp.frequencies.size + 1

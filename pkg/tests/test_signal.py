import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from smallspec import signal as sg
from smallspec.construction import f0_transform, f0_values, make_f0
from smallspec.errors import GridMismatchError, NyquistError
from smallspec.intervals import FreqIntervalSet
from smallspec.signal import Grid, SampledSignal

UNIT = Grid(1.0, 0.5, 4)
F0_GRID = Grid.from_step(128.0, math.pi / 1024)


@pytest.fixture(scope="module")
def f0():
    return make_f0(F0_GRID)


def rand_signal(grid, seed):
    return SampledSignal(grid, np.random.default_rng(seed).normal(size=grid.count))


# --------------------------------------------------------------------------
# grid


def test_grid_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        Grid(1.0, 2 / 3, 3)


def test_grid_rejects_inconsistent_count():
    with pytest.raises(ValueError):
        Grid(1.0, 0.5, 8)


def test_grid_nyquist_admissibility():
    with pytest.raises(NyquistError):
        Grid(1.0, 0.5, 4, nu_max=10.0)
    assert Grid(1.0, 0.5, 4, nu_max=6.0).nyquist == pytest.approx(2 * math.pi)


def test_for_bandwidth_is_power_of_two_and_covers_band():
    g = Grid.for_bandwidth(128.0, 781, 4)
    assert g.count == 2**18
    assert g.nyquist >= 4 * 781
    assert g.times[0] == -128.0
    assert g.count * g.step == pytest.approx(256.0)


# --------------------------------------------------------------------------
# pointwise operations


def test_pointwise_product_identity_and_zero():
    b = rand_signal(UNIT, 1)
    assert np.array_equal(sg.pointwise_product(SampledSignal.constant(UNIT, 1), b).values, b.values)
    assert not sg.pointwise_product(SampledSignal.constant(UNIT, 0), b).values.any()


def test_pointwise_product_grid_mismatch():
    with pytest.raises(GridMismatchError):
        sg.pointwise_product(SampledSignal.constant(UNIT, 1), SampledSignal.constant(Grid(2.0, 0.5, 8), 1))


def test_f0_times_one_minus_f0_at_origin(f0):
    p = sg.pointwise_product(f0, sg.one_minus(f0))
    m0 = F0_GRID.count // 2
    assert F0_GRID.times[m0] == 0.0
    a = 1 / (8 * math.pi)
    assert p.values[m0] == pytest.approx(a * (1 - a), rel=1e-15)


def test_one_minus():
    assert np.array_equal(sg.one_minus(SampledSignal.constant(UNIT, 0)).values, np.ones(4))
    assert not sg.one_minus(SampledSignal.constant(UNIT, 1)).values.any()
    a = rand_signal(UNIT, 2)
    assert np.allclose(sg.one_minus(sg.one_minus(a)).values, a.values, rtol=0, atol=1e-15)


def test_cosine_modulate():
    a = rand_signal(Grid(4.0, 0.5, 16), 3)
    assert np.array_equal(sg.cosine_modulate(a, 0).values, a.values)
    ones = SampledSignal.constant(a.grid, 1)
    c = sg.cosine_modulate(ones, math.pi / 4)
    assert np.allclose(c.values, np.cos(math.pi * a.grid.times / 4))
    m0 = a.grid.count // 2
    assert sg.cosine_modulate(a, 7.3).values[m0] == a.values[m0]
    with pytest.raises(ValueError):
        sg.cosine_modulate(a, -1)


def test_signal_rejects_nan():
    with pytest.raises(ValueError):
        SampledSignal(UNIT, [0, 1, np.nan, 0])


# --------------------------------------------------------------------------
# quadrature


def test_integral_of_constant_is_exact():
    assert sg.integral(SampledSignal.constant(UNIT, 1)) == 2.0
    assert sg.l2_norm_sq(SampledSignal.constant(UNIT, 1)) == 2.0


def test_integral_of_odd_ramp_is_zero():
    # periodic closure: the wrap sample carries the mean of ramp(-T) and ramp(T)
    g = Grid(1.0, 0.5, 4)
    v = g.times.copy()
    v[0] = 0.0
    assert sg.integral(SampledSignal(g, v)) == 0.0
    g = Grid(8.0, 1 / 64, 1024)
    assert abs(sg.integral(SampledSignal.from_function(g, lambda t: np.sin(np.pi * t / 8)))) < 1e-14


def test_integral_f0_against_wider_finer_oracle(f0):
    oracle_grid = Grid.from_step(4 * 128.0, math.pi / 4096)
    oracle = sg.integral(make_f0(oracle_grid))
    assert oracle == pytest.approx(1 / 3, abs=1e-7)
    assert abs(sg.integral(f0) - oracle) <= 1e-4
    assert abs(sg.integral(f0) - 1 / 3) <= 1e-4 / 3


@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**32 - 1))
def test_integral_is_linear(alpha, beta, seed):
    g = Grid(4.0, 1 / 16, 128)
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=g.count), rng.normal(size=g.count)
    lhs = sg.integral(SampledSignal(g, alpha * a + beta * b))
    rhs = alpha * sg.integral(SampledSignal(g, a)) + beta * sg.integral(SampledSignal(g, b))
    l1a = sg.integral(SampledSignal(g, np.abs(a)))
    l1b = sg.integral(SampledSignal(g, np.abs(b)))
    assert abs(lhs - rhs) <= 1e-12 * (abs(alpha) * l1a + abs(beta) * l1b) + 1e-300


def test_inner_product_basics():
    a, b = rand_signal(UNIT, 4), rand_signal(UNIT, 5)
    assert sg.inner_product(a, SampledSignal.constant(UNIT, 0)) == 0.0
    assert sg.inner_product(a, b) == sg.inner_product(b, a)


def test_inner_product_of_disjoint_spectra_vanishes(minimal2):
    G1, G2 = minimal2.G_history
    ip = sg.inner_product(G1, G2)
    assert abs(ip) <= 1e-6 * math.sqrt(sg.l2_norm_sq(G1) * sg.l2_norm_sq(G2))


def test_l2_norm_sq_zero():
    assert sg.l2_norm_sq(SampledSignal.constant(UNIT, 0)) == 0.0


def test_f0_energy_matches_parseval_of_closed_form(f0):
    freq_side, _ = integrate.quad(lambda x: f0_transform(x) ** 2, -1, 1, points=[-0.5, 0, 0.5], epsabs=1e-14)
    assert sg.l2_norm_sq(f0) == pytest.approx(freq_side / (2 * math.pi), rel=1e-6)


def test_f0_transform_is_triangle_self_convolution():
    h = 1e-4
    xi = np.arange(-0.5, 0.5 + h / 2, h)
    tri = np.maximum(0.0, 1 - 2 * np.abs(xi))
    conv = np.convolve(tri, tri) * h
    grid = np.arange(len(conv)) * h - 1.0
    assert np.allclose(conv, f0_transform(grid), atol=1e-7)


def test_f0_value_at_origin_from_inverse_transform():
    inv, _ = integrate.quad(f0_transform, -1, 1, points=[-0.5, 0, 0.5], epsabs=1e-14)
    assert inv / (2 * math.pi) == pytest.approx(1 / (8 * math.pi), rel=1e-12)
    assert f0_values(np.array([0.0]))[0] == pytest.approx(1 / (8 * math.pi), rel=1e-15)


# --------------------------------------------------------------------------
# spectrum


def test_dft_of_zero():
    est = sg.dft_spectrum(SampledSignal.constant(UNIT, 0))
    assert len(est.freqs) == len(est.amplitudes) == 4
    assert not est.amplitudes.any()


def test_dft_matches_direct_sum():
    g = Grid(2.0, 0.25, 16)
    a = rand_signal(g, 6)
    est = sg.dft_spectrum(a)
    direct = [g.step * np.sum(a.values * np.exp(-1j * xi * g.times)) for xi in est.freqs]
    assert np.allclose(est.amplitudes, direct, atol=1e-13)
    assert np.allclose(est.freqs, np.arange(-8, 8) * math.pi / 2)


def test_dft_f0_peak_and_band_limit(f0):
    est = sg.dft_spectrum(f0)
    mag = np.abs(est.amplitudes)
    peak = mag.argmax()
    assert est.freqs[peak] == 0.0
    assert mag[peak] == pytest.approx(1 / 3, rel=1e-4)
    assert mag[np.abs(est.freqs) > 1].max() <= 1e-6 * mag[peak]
    assert np.allclose(est.amplitudes.real, f0_transform(est.freqs), atol=1e-6)


def test_dft_of_windowed_cosine_matches_dirichlet_closed_form():
    g = Grid.from_step(32.0, math.pi / 64)
    a = SampledSignal.from_function(g, lambda t: np.cos(10 * t))
    est = sg.dft_spectrum(a)

    def geometric(w):
        # step * sum_m exp(i w t_m), summed in closed form
        z = np.exp(1j * w * g.step)
        return g.step * np.exp(1j * w * g.times[0]) * (1 - z**g.count) / (1 - z)

    oracle = 0.5 * (geometric(10 - est.freqs) + geometric(-10 - est.freqs))
    assert np.allclose(est.amplitudes, oracle, atol=1e-9)
    energy = est.energy
    near = np.minimum(np.abs(est.freqs - 10), np.abs(est.freqs + 10)) <= 3 * g.bin_width
    assert energy[near].sum() / energy.sum() > 0.95


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_dft_round_trip(seed):
    a = rand_signal(Grid(8.0, 1 / 32, 512), seed)
    back = sg.inverse_spectrum(sg.dft_spectrum(a), a.grid)
    assert np.max(np.abs(back.values - a.values)) <= 1e-10 * np.max(np.abs(a.values))


def _bandlimited(g, seed):
    # random combination of modulated F_0 copies, spectrum inside [-21, 21]
    rng = np.random.default_rng(seed)
    v = np.zeros(g.count)
    for c in rng.integers(0, 20, size=3):
        v += rng.normal() * f0_values(g.times - rng.uniform(-5, 5)) * np.cos(c * g.times)
    return SampledSignal(g, v)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_parseval_consistency(seed):
    g = Grid.for_bandwidth(64.0, 21, 4)
    for a in (_bandlimited(g, seed), make_f0(g)):
        est = sg.dft_spectrum(a)
        freq_side = est.energy.sum() * g.bin_width / (2 * math.pi)
        assert abs(sg.l2_norm_sq(a) - freq_side) <= 1e-6 * sg.l2_norm_sq(a)


@given(st.integers(0, 20), st.integers(0, 60))
@settings(max_examples=40, deadline=None)
def test_modulation_shifts_spectrum(c, k):
    g = Grid.for_bandwidth(64.0, 90, 4)
    base = SampledSignal(g, f0_values(g.times) * np.cos(c * g.times))
    support = FreqIntervalSet.of([(c - 1, c + 1), (-c - 1, -c + 1)])
    shifted = FreqIntervalSet.of(
        [(p.lo + s, p.hi + s) for p in support for s in (k, -k)]
    )
    assert sg.out_of_band_energy(sg.cosine_modulate(base, k), shifted, 4) <= 1e-6


# --------------------------------------------------------------------------
# out-of-band energy


def test_out_of_band_zero_signal():
    assert sg.out_of_band_energy(SampledSignal.constant(UNIT, 0), FreqIntervalSet.of([(-1, 1)])) == 0.0


def test_out_of_band_f0(f0):
    assert sg.out_of_band_energy(f0, FreqIntervalSet.of([(-1, 1)]), 4) <= 1e-6


def test_out_of_band_g1_with_k10(k10_stage1):
    G1 = k10_stage1.G_history[0]
    assert sg.out_of_band_energy(G1, FreqIntervalSet.of([(8, 12), (-12, -8)]), 4) <= 1e-5
    # the same signal against the wrong band is almost all out of band
    assert sg.out_of_band_energy(G1, FreqIntervalSet.of([(-1, 1)]), 4) > 0.99


def test_out_of_band_nyquist_violation(f0):
    with pytest.raises(NyquistError):
        sg.out_of_band_energy(f0, FreqIntervalSet.of([(0, 10**6)]))


# --------------------------------------------------------------------------
# csv


def test_signal_csv_round_trip_is_exact(tmp_path):
    g = Grid(8.0, 1 / 32, 512)
    a = rand_signal(g, 7)
    path = tmp_path / "a.csv"
    sg.write_signal_csv(path, a)
    assert path.read_text().splitlines()[0] == "t,value"
    assert np.array_equal(sg.read_signal_csv(path, g).values, a.values)


def test_spectrum_csv_header(tmp_path):
    path = tmp_path / "s.csv"
    sg.write_spectrum_csv(path, sg.dft_spectrum(rand_signal(UNIT, 8)))
    lines = path.read_text().splitlines()
    assert lines[0] == "xi,re,im,abs" and len(lines) == 5


def test_precision_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv(sg.PRECISION_ENV, "6")
    path = tmp_path / "a.csv"
    sg.write_signal_csv(path, SampledSignal.constant(UNIT, 1 / 3))
    assert path.read_text().splitlines()[1].endswith(",0.333333")

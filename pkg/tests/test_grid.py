import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from isci.grid import GridConfig, PrototypePair, cross_ambiguity, grid_index_maps

T = 1.0 / 30e3
F = 30e3
PAIR = PrototypePair(duration=T)


def ambiguity_quad(tau, nu):
    """Defining integral, in units of T, by adaptive quadrature."""
    a, b = tau / T, nu * T
    inside = lambda s: 1.0 if 0.0 <= s + a < 1.0 else 0.0
    pts = [p for p in (-a, 1.0 - a) if 0.0 < p < 1.0]
    re = integrate.quad(lambda s: inside(s) * np.cos(2 * np.pi * b * (s + a)), 0, 1, points=pts or None,
                        epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    im = integrate.quad(lambda s: inside(s) * np.sin(2 * np.pi * b * (s + a)), 0, 1, points=pts or None,
                        epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return re + 1j * im


def test_oracle_sanity():
    assert abs(ambiguity_quad(0.0, 0.0) - 1.0) < 1e-13
    assert abs(ambiguity_quad(T / 4, 0.0) - 0.75) < 1e-13


def test_origin_is_one():
    assert abs(cross_ambiguity(PAIR, 0.0, 0.0) - (1 + 0j)) <= 1e-12


def test_disjoint_supports():
    assert cross_ambiguity(PAIR, T, 0.37 * F) == 0
    assert cross_ambiguity(PAIR, -1.5 * T, 0.1 * F) == 0


@pytest.mark.parametrize("tau,nu,expected", [(0.0, F, 0.0), (T / 2, 0.0, 0.5)])
def test_against_quadrature_examples(tau, nu, expected):
    c = cross_ambiguity(PAIR, tau, nu)
    assert abs(c - ambiguity_quad(tau, nu)) <= 1e-10
    assert abs(c - expected) <= 1e-10


@pytest.mark.parametrize("k", range(-3, 4))
def test_lattice_orthogonality(k):
    l = np.arange(-3, 4)
    c = cross_ambiguity(PAIR, k * T, l * F)
    expected = ((k == 0) & (l == 0)).astype(float)
    np.testing.assert_allclose(c, expected, atol=1e-10)


def test_random_points_match_quadrature_and_conjugate_symmetry():
    rng = np.random.default_rng(7)
    tau = rng.uniform(-1.2 * T, 1.2 * T, 100)
    nu = rng.uniform(-3 * F, 3 * F, 100)
    c = cross_ambiguity(PAIR, tau, nu)
    oracle = np.array([ambiguity_quad(t, v) for t, v in zip(tau, nu)])
    assert np.max(np.abs(c - oracle)) <= 1e-10
    # C(-tau, -nu) = exp(j 2 pi nu tau) conj(C(tau, nu)) for identical pulses
    mirrored = cross_ambiguity(PAIR, -tau, -nu)
    assert np.max(np.abs(mirrored - np.exp(2j * np.pi * nu * tau) * np.conj(c))) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(-10.0, 10.0))
def test_modulus_bounded(a, b):
    assert abs(cross_ambiguity(PAIR, a * T, b * F)) <= 1.0 + 1e-12


def test_broadcasting():
    c = cross_ambiguity(PAIR, np.zeros((3, 1)), np.zeros((1, 4)))
    assert c.shape == (3, 4)


def test_pulses_are_unit_energy():
    t = np.linspace(0, T, 200001)
    gt, gr = PAIR.pulses(t)
    assert integrate.trapezoid(gt * np.conj(gr), t) == pytest.approx(1.0, rel=1e-4)


@pytest.mark.parametrize("kwargs", [dict(M=0), dict(N=0), dict(T=0.0), dict(F=-1.0), dict(M=2.5)])
def test_grid_validation(kwargs):
    with pytest.raises(ValueError):
        GridConfig(**kwargs)


def test_grid_exposes_TF():
    g = GridConfig()
    assert g.TF == pytest.approx(1.0, abs=1e-15)
    assert g.MN == 24


def test_unknown_pulse_kind():
    with pytest.raises(ValueError):
        PrototypePair(kind="rrc")


def test_index_maps_paper_grid():
    maps = grid_index_maps(GridConfig(M=6, N=4))
    assert maps.MN == 24
    np.testing.assert_array_equal(maps.direct_positions, 25 * np.arange(24))
    assert maps.direct_positions[-1] == 575


def test_index_maps_single_cell():
    maps = grid_index_maps(GridConfig(M=1, N=1))
    np.testing.assert_array_equal(maps.direct_positions, [0])
    assert maps.pair_to_linear((0, 0), (0, 0)) == 0


def test_index_round_trips():
    maps = grid_index_maps(GridConfig(M=6, N=4))
    k = np.arange(24)
    np.testing.assert_array_equal(maps.cell_to_linear(*maps.linear_to_cell(k)), k)
    i = np.arange(24 ** 2)
    rx, tx = maps.linear_to_pair(i)
    np.testing.assert_array_equal(maps.pair_to_linear(rx, tx), i)


def test_coefficient_index_matches_vec_of_transpose():
    maps = grid_index_maps(GridConfig(M=3, N=2))
    H = np.arange(36).reshape(6, 6)  # H[rx, tx]
    h = H.T.reshape(-1, order="F")       # vec(H^T), column-major
    m, n, mu, nl = maps.coefficient_table()
    rx = m + 3 * n
    tx = mu + 3 * nl
    np.testing.assert_array_equal(h, H[rx, tx])

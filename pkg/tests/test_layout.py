import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isci.grid import GridConfig
from isci.layout import (DataMask, FrameLayout, KronRowOperator, assemble_A, assemble_B,
                         build_equally_spaced_layout, sample_frame, selection_D)


def test_paper_layout(layout):
    assert len(layout.pilot_indices) == 6
    m, n = layout.pilot_indices % 6, layout.pilot_indices // 6
    assert set(zip(m.tolist(), n.tolist())) == {(a, b) for a in (0, 2, 4) for b in (0, 2)}
    assert layout.L_d == 18
    assert layout.pilot_amplitude ** 2 == layout.data_variance


def test_partition_property(layout):
    both = np.concatenate([layout.pilot_indices, layout.data_indices])
    np.testing.assert_array_equal(np.sort(both), np.arange(24))
    x = layout.x_p + layout.embed_data(np.ones(layout.L_d))
    np.testing.assert_array_equal(np.flatnonzero(layout.x_p), layout.pilot_indices)
    np.testing.assert_array_equal(np.flatnonzero(x - layout.x_p), layout.data_indices)


@pytest.mark.parametrize("M,N", [(6, 4), (3, 2), (1, 1), (4, 4)])
def test_all_pilot_frame(M, N):
    lay = build_equally_spaced_layout(GridConfig(M=M, N=N), pilot_density=1.0)
    assert lay.L_d == 0 and len(lay.data_indices) == 0


def test_density_zero_is_all_data(grid):
    lay = build_equally_spaced_layout(grid, pilot_density=0.0)
    assert lay.L_d == grid.MN


def test_infeasible_density_rejected(grid):
    with pytest.raises(ValueError):
        build_equally_spaced_layout(grid, pilot_density=0.2)
    with pytest.raises(ValueError):
        build_equally_spaced_layout(grid, pilot_density=1.5)


def test_layout_validation():
    with pytest.raises(ValueError):
        FrameLayout(4, [0, 1], [1, 2, 3], 1.0, 1.0, [1, 1])
    with pytest.raises(ValueError):
        FrameLayout(4, [0], [1, 2, 3], 1.0, 1.0, [0.5])
    with pytest.raises(ValueError):
        FrameLayout(4, [0], [1, 2, 3], 1.0, 0.0, [1.0])


def test_mask(layout):
    mask = layout.mask
    assert np.trace(mask.A_cd) == layout.L_d
    np.testing.assert_array_equal(mask.indices, layout.data_indices)


def test_A_basis_vector():
    A = assemble_A(np.array([1.0, 0.0]))
    np.testing.assert_array_equal(A, [[1, 0, 0, 0], [0, 0, 1, 0]])


def test_A_linearity(layout):
    rng = np.random.default_rng(0)
    x_d = layout.embed_data(rng.standard_normal(layout.L_d) + 1j * rng.standard_normal(layout.L_d))
    np.testing.assert_allclose(assemble_A(layout.x_p) + assemble_A(x_d), assemble_A(layout.x_p + x_d))


@pytest.mark.parametrize("MN", [3, 4, 6])
def test_A_applies_H(MN):
    rng = np.random.default_rng(MN)
    for _ in range(50):
        H = rng.standard_normal((MN, MN)) + 1j * rng.standard_normal((MN, MN))
        x = rng.standard_normal(MN) + 1j * rng.standard_normal(MN)
        h = H.reshape(-1)  # vec(H^T)
        assert np.max(np.abs(assemble_A(x) @ h - H @ x)) <= 1e-12
        assert np.max(np.abs((KronRowOperator(x) @ h) - H @ x)) <= 1e-12


def test_structured_operator_matches_dense():
    rng = np.random.default_rng(1)
    MN = 4
    x = rng.standard_normal(MN) + 1j * rng.standard_normal(MN)
    y = rng.standard_normal(MN) + 1j * rng.standard_normal(MN)
    C = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    op = KronRowOperator(x)
    A, Ay = assemble_A(x), assemble_A(y)
    np.testing.assert_allclose(op.sandwich(C, y), A @ C @ Ay.conj().T, atol=1e-12)
    np.testing.assert_allclose(op.tosparse().toarray(), A)
    np.testing.assert_allclose(op @ C, A @ C, atol=1e-12)
    with pytest.raises(ValueError):
        op @ np.zeros(5)


def test_B():
    np.testing.assert_array_equal(assemble_B(np.ones(5)), np.eye(5))
    rng = np.random.default_rng(2)
    x, g = rng.standard_normal(6), rng.standard_normal(6)
    np.testing.assert_allclose(assemble_B(x) @ g, x * g)


def test_B_pilot_data_split(layout):
    x_d = layout.embed_data(np.arange(1, layout.L_d + 1))
    np.testing.assert_array_equal(assemble_B(layout.x_p) + assemble_B(x_d), assemble_B(layout.x_p + x_d))


def test_D_small():
    D = selection_D(DataMask(np.array([0.0, 1.0, 0.0])))
    np.testing.assert_array_equal(D, [[0], [1], [0]])


def test_D_identities(layout):
    D = selection_D(layout.mask)
    np.testing.assert_array_equal(D.T @ D, np.eye(layout.L_d))
    np.testing.assert_array_equal(D @ D.T, layout.mask.A_cd)
    assert np.trace(D @ D.T) == layout.L_d
    d = np.arange(layout.L_d) + 1.0
    np.testing.assert_array_equal(D @ d, layout.embed_data(d))


def test_D_empty_rejected():
    with pytest.raises(ValueError):
        selection_D(DataMask(np.zeros(4)))


def test_sample_frame_statistics(layout):
    rng = np.random.default_rng(3)
    draws = np.array([sample_frame(layout, s)[1] for s in rng.integers(0, 2**63, 100_000 // layout.L_d + 1)])
    flat = draws.reshape(-1)
    assert abs(np.mean(np.abs(flat) ** 2) / layout.data_variance - 1) < 0.02
    se = np.sqrt(layout.data_variance / flat.size)
    assert abs(flat.real.mean()) < 3 * se and abs(flat.imag.mean()) < 3 * se


def test_sample_frame_pilots_fixed_and_reproducible(layout):
    xs = [sample_frame(layout, s)[0] for s in range(20)]
    for x in xs:
        np.testing.assert_array_equal(x[layout.pilot_indices], layout.pilot_values)
    np.testing.assert_array_equal(sample_frame(layout, 5)[0], sample_frame(layout, 5)[0])
    assert not np.array_equal(xs[0], xs[1])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4))
def test_lattice_layouts_partition(M, N, sm, sn):
    lay = build_equally_spaced_layout(GridConfig(M=M, N=N), strides=(sm, sn))
    assert len(lay.pilot_indices) + lay.L_d == M * N
    assert len(np.intersect1d(lay.pilot_indices, lay.data_indices)) == 0

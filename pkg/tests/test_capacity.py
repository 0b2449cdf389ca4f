import numpy as np
import pytest

from isci.capacity import (build_capacity_context, capacity_lower, capacity_samples, capacity_upper,
                           conditional_error_cov, ergodic_capacity_mc, mean_and_se)
from isci.channel_sim import sample_transmissions
from isci.channel_stats import ChannelSecondOrder, ScatteringFunction
from isci.estimators import MODELS, SIMPLIFIED, build_context_full, build_context_partial, partial_moments
from isci.experiments import DEFAULT_SNR_AXIS, SweepPlan, evaluate_point, snr_to_noise_variance
from isci.layout import build_equally_spaced_layout
from isci.linops import direct_positions


def noise_at(stats, grid, snr, sigma_d2=1.0):
    return float(snr_to_noise_variance(snr, np.trace(stats.C_h).real, grid.MN, sigma_d2))


def contexts(stats, layout, s2):
    pm = partial_moments(stats, layout)
    return {m: build_capacity_context(build_context_partial(m, stats, layout, noise_variance=s2, moments=pm), layout)
            for m in MODELS}


def min_eig(X):
    return np.linalg.eigvalsh((X + X.conj().T) / 2)[0]


@pytest.fixture(scope="module")
def caps10(stats, layout, grid):
    s2 = noise_at(stats, grid, 10.0)
    return s2, contexts(stats, layout, s2)


@pytest.fixture(scope="module")
def batch(grid, pair, scattering, layout):
    return sample_transmissions(grid, pair, scattering, layout, 2000, seed=31)


def test_effective_noise_orderings(caps10):
    s2, caps = caps10
    scale = np.trace(caps["fm"].K_z).real
    for m, cap in caps.items():
        assert min_eig(cap.K_z - s2 * np.eye(24)) >= -1e-12 * scale
        if m in SIMPLIFIED:
            assert min_eig(cap.K_z_worst - cap.K_z) >= -1e-12 * scale
    assert caps["fm"].K_z_worst is None


def test_dN_effective_noise_exceeds_fm(stats, layout, grid):
    for snr in DEFAULT_SNR_AXIS:
        caps = contexts(stats, layout, noise_at(stats, grid, snr))
        assert np.trace(caps["dN"].K_z).real >= np.trace(caps["fm"].K_z).real


def test_zero_spread_effective_noise_collapses(stats_zero, layout, grid):
    caps = contexts(stats_zero, layout, noise_at(stats_zero, grid, 20.0))
    for m in SIMPLIFIED:
        np.testing.assert_allclose(caps[m].K_z, caps["fm"].K_z, atol=1e-9 * np.abs(caps["fm"].K_z).max())


def test_conditional_covariance_matches_direct_inverse(stats, layout, grid):
    s2 = noise_at(stats, grid, 10.0)
    for m in SIMPLIFIED:
        ctx = build_context_partial(m, stats, layout, noise_variance=s2)
        dp = direct_positions(24)
        cross = ctx.cross_est_cov.conj().T.copy()   # E[h ghat^H], columns at direct positions
        cov_e_g = cross[:, dp] - ctx.est_cov[:, dp]  # E[e ghat^H]
        ref = ctx.error_cov - cov_e_g @ np.linalg.solve(ctx.direct_est_cov, cov_e_g.conj().T)
        got = conditional_error_cov(ctx)
        assert np.max(np.abs(got - ref)) <= 1e-8 * np.max(np.abs(ctx.error_cov))
        # the estimate is uncorrelated with what is left
        assert min_eig(ctx.error_cov - got) >= -1e-12


def test_zero_channel(grid, layout):
    zero = ChannelSecondOrder(grid.MN, np.zeros((grid.MN ** 2,) * 2, dtype=complex), "zero")
    for m in MODELS:
        cap = build_capacity_context(build_context_partial(m, zero, layout, noise_variance=0.1), layout)
        assert capacity_upper(cap) == 0.0


def test_all_pilot_frame_has_zero_capacity(stats, grid):
    lay = build_equally_spaced_layout(grid, pilot_density=1.0)
    b = sample_transmissions(grid, *_pair_sc(grid), lay, 4, seed=0)
    for m in MODELS:
        cap = build_capacity_context(build_context_partial(m, stats, lay, noise_variance=0.1), lay)
        assert ergodic_capacity_mc(cap, b) == (0.0, 0.0)
        assert capacity_upper(cap) == 0.0
        if m != "fm":
            assert capacity_lower(cap, b) == (0.0, 0.0)


def _pair_sc(grid):
    from isci.grid import PrototypePair
    return PrototypePair.for_grid(grid), ScatteringFunction.from_spread_factor(1e-3, grid)


def test_vanishing_data_power(stats, grid):
    lay = build_equally_spaced_layout(grid, sigma_d2=1e-12)
    b = sample_transmissions(grid, *_pair_sc(grid), lay, 50, seed=0)
    cap = build_capacity_context(build_context_partial("fm", stats, lay, noise_variance=0.01), lay)
    assert ergodic_capacity_mc(cap, b)[0] < 1e-8


def test_full_model_dominates_at_10dB(caps10, batch):
    s2, caps = caps10
    fm, fm_se = ergodic_capacity_mc(caps["fm"], batch)
    for m in SIMPLIFIED:
        c, se = ergodic_capacity_mc(caps[m], batch)
        assert c <= fm + 3 * np.hypot(se, fm_se)


def test_neglect_models_lose_capacity_at_10dB(caps10, batch):
    # fr and iN lose well beyond paired noise; dN sits within 1e-4 relative of fm
    s2, caps = caps10
    y = batch.received(s2)
    fm = capacity_samples(caps["fm"], y)
    for m in ("fr", "iN"):
        d = capacity_samples(caps[m], y) - fm
        assert d.mean() < -10 * d.std(ddof=1) / np.sqrt(d.size)
    d = capacity_samples(caps["dN"], y) - fm
    assert abs(d.mean()) < 1e-4 * fm.mean()


def test_sandwich_and_lower_bound_at_10dB(caps10, batch):
    s2, caps = caps10
    for m in MODELS:
        mc, se = ergodic_capacity_mc(caps[m], batch)
        assert mc <= capacity_upper(caps[m]) + 3 * se
        if m in SIMPLIFIED:
            lo, lo_se = capacity_lower(caps[m], batch)
            assert lo - 3 * lo_se <= mc


def test_zero_spread_lower_equals_main(stats_zero, layout, grid):
    pair, _ = _pair_sc(grid)
    b = sample_transmissions(grid, pair, ScatteringFunction(0.0, 0.0), layout, 500, seed=2)
    caps = contexts(stats_zero, layout, noise_at(stats_zero, grid, 20.0))
    for m in SIMPLIFIED:
        main = capacity_samples(caps[m], b.received(caps[m].estimator.noise_variance))
        low = capacity_samples(caps[m], b.received(caps[m].estimator.noise_variance), worst=True)
        d = main - low
        assert abs(d.mean()) <= 3 * d.std(ddof=1) / np.sqrt(d.size) + 1e-9


def test_upper_bound_growth_without_spread(stats_zero, layout, grid):
    up = [capacity_upper(contexts(stats_zero, layout, noise_at(stats_zero, grid, snr))["fm"]) for snr in (40.0, 60.0)]
    expected = layout.L_d * np.log2(100.0)
    assert up[1] - up[0] == pytest.approx(expected, rel=0.05)


def test_upper_bound_reproducible(caps10, stats, layout):
    s2, caps = caps10
    again = contexts(stats, layout, s2)
    for m in MODELS:
        assert capacity_upper(again[m]) == capacity_upper(caps[m])


def test_capacity_monotone_in_snr(snr_sweep):
    for m in MODELS:
        rows = sorted(snr_sweep.select(model=m, knowledge="partial"), key=lambda r: r["snr_db"])
        for a, b in zip(rows, rows[1:]):
            assert b["cap_mc"] >= a["cap_mc"] - 3 * np.hypot(a["cap_mc_se"], b["cap_mc_se"])
            assert b["cap_upper"] >= a["cap_upper"]


def test_per_symbol_capacity(snr_sweep, layout):
    for r in snr_sweep.select(knowledge="partial"):
        assert r["cap_mc_per_symbol"] == pytest.approx(r["cap_mc"] / layout.L_d, rel=1e-14)


def test_rejections(stats, layout):
    cap = build_capacity_context(build_context_partial("fm", stats, layout, noise_variance=0.1), layout)
    with pytest.raises(ValueError, match="simplified"):
        capacity_samples(cap, np.zeros((2, 24)), worst=True)
    with pytest.raises(ValueError, match="partial"):
        build_capacity_context(build_context_full("fm", stats, layout, layout.x_p, 0.1), layout)


def test_lower_bound_rejects_full_model(caps10, batch):
    with pytest.raises(ValueError, match="simplified"):
        capacity_lower(caps10[1]["fm"], batch)


def test_mean_and_se():
    assert mean_and_se([1.0, 3.0]) == (2.0, pytest.approx(1.0))
    assert mean_and_se([2.0])[1] == 0.0

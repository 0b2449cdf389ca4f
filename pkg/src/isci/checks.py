"""Deterministic identity and ordering checks on a configured setup."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel_sim import sample_transmissions
from .channel_stats import build_second_order
from .estimators import MODELS, build_context_full, build_context_partial, estimate, full_moments, partial_moments
from .experiments import SweepPlan, snr_to_noise_variance
from .sensing import known_symbol_errors, sensing_error

IDENTITY_TOL = 1e-8


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def rel_diff(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    scale = max(float(np.max(np.abs(b))), np.finfo(float).tiny)
    return float(np.max(np.abs(a - b))) / scale


def _identity(name, a, b, tol=IDENTITY_TOL):
    d = rel_diff(a, b)
    return CheckResult(name, d <= tol, f"relative deviation {d:.3e} (tol {tol:g})")


def run_checks(plan: SweepPlan, snr_db=None, data_draws: int = 50, frames: int = 32) -> list[CheckResult]:
    """Identities of the direct-neglect model, optimality orderings and the zero-spread collapse."""
    snrs = tuple(plan.values if plan.axis == "snr_db" else plan.snr_db) if snr_db is None else tuple(snr_db)
    grid, pair, layout = plan.grid, plan.pair(), plan.layout()
    scattering = plan.scattering(plan.delta_D)
    stats = build_second_order(grid, pair, scattering, plan.quad, cache_dir=plan.cache_dir)
    trace = float(np.real(np.trace(stats.C_h)))
    noise = snr_to_noise_variance(np.asarray(snrs), trace, grid.MN, layout.data_variance)
    s_mid = float(noise[len(noise) // 2])
    out = []

    pm = partial_moments(stats, layout)
    out.append(_identity("C_y dN = fm (pilots)", pm.obs_cov_noisefree("dN"), pm.obs_cov_noisefree("fm")))
    batch = sample_transmissions(grid, pair, scattering, layout, frames, plan.path_count, plan.seed)
    x0 = batch.x[0]
    fmom = full_moments(stats, layout, x0)
    out.append(_identity("C_y dN = fm (known symbols)", fmom.obs_cov_noisefree("dN"), fmom.obs_cov_noisefree("fm")))

    y = batch.received(s_mid)
    fm = build_context_partial("fm", stats, layout, noise_variance=s_mid, moments=pm)
    dn = build_context_partial("dN", stats, layout, noise_variance=s_mid, moments=pm)
    out.append(_identity("g_hat dN = direct part of h_hat fm (pilots)", estimate(dn, y).g_hat, estimate(fm, y).g_hat))
    fm_f = build_context_full("fm", stats, layout, x0, s_mid, moments=fmom)
    dn_f = build_context_full("dN", stats, layout, x0, s_mid, moments=fmom)
    out.append(_identity("g_hat dN = direct part of h_hat fm (known symbols)",
                         estimate(dn_f, y[0]).g_hat, estimate(fm_f, y[0]).g_hat))

    D = {m: np.array([sensing_error(build_context_partial(m, stats, layout, noise_variance=s, moments=pm)
                                    .direct_error_cov) for s in noise]) for m in MODELS}
    known = known_symbol_errors(stats, layout, noise, data_draws, plan.seed).mean()
    out.append(_identity("D dN = D fm (pilots)", D["dN"], D["fm"]))
    out.append(_identity("D dN = D fm (known symbols)", known[:, MODELS.index("dN")], known[:, MODELS.index("fm")]))

    slack = 1 + IDENTITY_TOL
    for m in ("fr", "iN"):
        ok = D["fm"] <= D[m] * slack
        out.append(CheckResult(f"D fm <= D {m}", bool(ok.all()),
                               f"holds at {int(ok.sum())}/{ok.size} SNR points"))
    ok = known[:, MODELS.index("fm")] <= D["fm"] * slack
    out.append(CheckResult("known-symbol D fm <= D fm", bool(ok.all()), f"holds at {int(ok.sum())}/{ok.size} SNR points"))

    flat = build_second_order(grid, pair, replace(plan, delta_D=0.0).scattering(0.0), plan.quad,
                              cache_dir=plan.cache_dir)
    pm0 = partial_moments(flat, layout)
    s0 = float(snr_to_noise_variance(snrs[len(snrs) // 2], float(np.real(np.trace(flat.C_h))), grid.MN,
                                     layout.data_variance))
    D0 = [sensing_error(build_context_partial(m, flat, layout, noise_variance=s0, moments=pm0).direct_error_cov)
          for m in MODELS]
    out.append(_identity("zero spread: all models give the same D", D0, np.full(len(D0), D0[0])))
    return out

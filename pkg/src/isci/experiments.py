"""SNR and spread-factor sweeps over all models and knowledge cases."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .capacity import build_capacity_context, capacity_samples, capacity_upper, mean_and_se
from .channel_sim import DEFAULT_PATHS, sample_transmissions
from .channel_stats import QuadratureSpec, ScatteringFunction, build_second_order
from .estimators import MODELS, SIMPLIFIED, build_context_partial, partial_moments
from .grid import GridConfig, PrototypePair
from .layout import build_equally_spaced_layout
from .sensing import DEFAULT_DATA_DRAWS, known_symbol_errors, sensing_error

log = logging.getLogger(__name__)

DEFAULT_SNR_AXIS = tuple(float(s) for s in range(0, 61, 5))
DEFAULT_SPREAD_SNRS = (3.0, 10.0, 20.0, 40.0)
DEFAULT_SPREAD_AXIS = (0.0,) + tuple(float(v) for v in np.geomspace(1e-4, 3e-2, 8))

COLUMNS = (
    "axis_name", "axis_value", "model", "knowledge",
    "D", "D_se", "D_known", "D_known_se",
    "cap_mc", "cap_mc_se", "cap_upper", "cap_lower", "cap_lower_se",
    "cap_diff", "cap_diff_se", "cap_lower_diff", "cap_lower_diff_se", "D_ratio",
    "D_known_ratio", "D_known_ratio_se",
    "snr_db", "delta_D", "sigma_n2", "trace_C_h", "cap_mc_per_symbol",
)
TEXT_COLUMNS = ("axis_name", "model", "knowledge")


class SweepError(RuntimeError):
    pass


def snr_to_noise_variance(snr_db, trace_C_h, MN, sigma_d2):
    return trace_C_h * sigma_d2 / (MN * 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0))


def noise_variance_to_snr(sigma_n2, trace_C_h, MN, sigma_d2):
    return 10.0 * np.log10(trace_C_h * sigma_d2 / (MN * np.asarray(sigma_n2, dtype=float)))


@dataclass(frozen=True)
class SweepPlan:
    axis: str = "snr_db"
    values: tuple | None = None
    grid: GridConfig = field(default_factory=GridConfig)
    pulse: str = "rect"
    pilot_strides: tuple = (2, 2)
    sigma_p: float = 1.0
    sigma_d2: float = 1.0
    delta_D: float = 1e-3
    spread_ratio: float = 1.0
    snr_db: tuple = DEFAULT_SPREAD_SNRS
    draws: int = 2000
    data_draws: int = DEFAULT_DATA_DRAWS
    path_count: int = DEFAULT_PATHS
    noise_variances: tuple | None = None
    seed: int = 20250101
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    cache_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.axis not in ("snr_db", "delta_D"):
            raise ValueError(f"unknown sweep axis {self.axis!r}")
        if self.values is None:
            object.__setattr__(self, "values", DEFAULT_SNR_AXIS if self.axis == "snr_db" else DEFAULT_SPREAD_AXIS)
        if not len(self.values):
            raise ValueError("sweep axis is empty")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.axis == "delta_D" and min(self.values) < 0:
            raise ValueError("spread factors must be non-negative")
        object.__setattr__(self, "snr_db", tuple(float(v) for v in self.snr_db))
        if self.noise_variances is not None:
            nv = tuple(float(v) for v in self.noise_variances)
            if not nv or min(nv) <= 0:
                raise ValueError("noise variances must be a nonempty list of positive numbers")
            object.__setattr__(self, "noise_variances", nv)
        if self.draws < 2:
            raise ValueError("draws must be >= 2")

    def layout(self):
        return build_equally_spaced_layout(self.grid, sigma_p=self.sigma_p, sigma_d2=self.sigma_d2,
                                           strides=tuple(self.pilot_strides))

    def pair(self):
        return PrototypePair.for_grid(self.grid, self.pulse)

    def scattering(self, delta):
        """Support with ``tau/T = spread_ratio * nu/F`` and area ``delta``."""
        g = self.grid
        r = math.sqrt(delta / g.TF)
        a = math.sqrt(self.spread_ratio)
        return ScatteringFunction(tau_spread=g.T * r * a, doppler_spread=g.F * r / a)


@dataclass
class SweepResult:
    axis_name: str
    records: list
    plan: SweepPlan | None = None

    def select(self, **where):
        return [r for r in self.records if all(_match(r[k], v) for k, v in where.items())]

    def value(self, column, **where):
        rows = self.select(**where)
        if len(rows) != 1:
            raise KeyError(f"{len(rows)} records match {where}")
        return rows[0][column]

    def axis_values(self):
        return sorted({r["axis_value"] for r in self.records})


def _match(a, b):
    if isinstance(a, float) and isinstance(b, (int, float)):
        return a == float(b) or math.isclose(a, b, rel_tol=1e-12, abs_tol=0.0)
    return a == b


def evaluate_point(plan: SweepPlan, delta: float, snrs=None, point_index: int = 0, noise=None):
    """All metrics for one spread factor at several SNRs; returns records.

    Pass either ``snrs`` (dB) or fixed noise variances ``noise``.
    """
    grid, pair, layout = plan.grid, plan.pair(), plan.layout()
    scattering = plan.scattering(delta)
    stats = build_second_order(grid, pair, scattering, plan.quad, cache_dir=plan.cache_dir)
    trace = float(np.real(np.trace(stats.C_h)))
    if noise is None:
        snrs = np.asarray(snrs, dtype=float)
        noise = snr_to_noise_variance(snrs, trace, grid.MN, layout.data_variance)
    else:
        noise = np.asarray(noise, dtype=float)
        snrs = noise_variance_to_snr(noise, trace, grid.MN, layout.data_variance)

    batch = sample_transmissions(grid, pair, scattering, layout, plan.draws, plan.path_count, plan.seed)
    known = known_symbol_errors(stats, layout, noise, plan.data_draws, plan.seed)
    known_mean, known_se = known.mean(), known.se()
    moments = partial_moments(stats, layout)

    records = []
    for j, (snr, s2) in enumerate(zip(snrs, noise)):
        axis_value = float(snr) if plan.axis == "snr_db" else float(delta)
        base = dict(axis_name=plan.axis, axis_value=axis_value, snr_db=float(snr), delta_D=float(delta),
                    sigma_n2=float(s2), trace_C_h=trace)
        partial, samples = {}, {}
        y = batch.received(s2)
        for model in MODELS:
            try:
                ctx = build_context_partial(model, stats, layout, noise_variance=s2, moments=moments)
                cap = build_capacity_context(ctx, layout)
                samples[model] = capacity_samples(cap, y)
                mc, mc_se = mean_and_se(samples[model])
                lo, lo_se = math.nan, math.nan
                if model in SIMPLIFIED:
                    samples[model + "_lower"] = capacity_samples(cap, y, worst=True)
                    lo, lo_se = mean_and_se(samples[model + "_lower"])
                partial[model] = dict(
                    D=sensing_error(ctx.direct_error_cov), D_se=0.0,
                    cap_mc=mc, cap_mc_se=mc_se, cap_upper=capacity_upper(cap),
                    cap_lower=lo, cap_lower_se=lo_se,
                    cap_mc_per_symbol=mc / layout.L_d if layout.L_d else 0.0,
                )
            except Exception as exc:
                raise SweepError(f"model {model} failed at delta_D={delta}, snr_db={snr}: {exc}") from exc
        for k, model in enumerate(MODELS):
            row = dict.fromkeys(COLUMNS, math.nan)
            row.update(base, model=model, knowledge="partial", **partial[model])
            row["cap_diff"] = row["cap_mc"] - partial["fm"]["cap_mc"]
            row["cap_diff_se"] = _paired_se(samples[model], samples["fm"])
            if model in SIMPLIFIED:
                row["cap_lower_diff"] = row["cap_lower"] - partial["fm"]["cap_mc"]
                row["cap_lower_diff_se"] = _paired_se(samples[model + "_lower"], samples["fm"])
            row["D_ratio"] = _ratio(row["D"], partial["fm"]["D"])
            records.append(row)

            row = dict.fromkeys(COLUMNS, math.nan)
            row.update(base, model=model, knowledge="full",
                       D_known=float(known_mean[j, k]), D_known_se=float(known_se[j, k]))
            r, r_se = known.ratio(model)
            row["D_known_ratio"] = float(r[j])
            row["D_known_ratio_se"] = float(r_se[j])
            records.append(row)
    log.info("point %d (delta_D=%g) done", point_index, delta)
    return records


def _paired_se(a, b):
    diff = np.asarray(a) - np.asarray(b)
    return float(np.std(diff, ddof=1) / np.sqrt(diff.size)) if diff.size > 1 else 0.0


def _ratio(a, b):
    if b == 0:
        return 1.0 if a == 0 else math.inf
    return a / b


def run_snr_sweep(plan: SweepPlan) -> SweepResult:
    if plan.axis != "snr_db":
        raise ValueError(f"run_snr_sweep needs an snr_db plan, got axis {plan.axis!r}")
    records = evaluate_point(plan, plan.delta_D, plan.values)
    return SweepResult("snr_db", records, plan)


def _spread_point(args):
    plan, i, delta = args
    if plan.noise_variances is not None:
        return evaluate_point(plan, delta, point_index=i, noise=plan.noise_variances)
    return evaluate_point(plan, delta, plan.snr_db, i)


def run_spread_sweep(plan: SweepPlan) -> SweepResult:
    if plan.axis != "delta_D":
        raise ValueError(f"run_spread_sweep needs a delta_D plan, got axis {plan.axis!r}")
    jobs = [(plan, i, d) for i, d in enumerate(plan.values)]
    if plan.workers > 1:
        with ProcessPoolExecutor(plan.workers) as pool:
            chunks = list(pool.map(_spread_point, jobs))
    else:
        chunks = [_spread_point(j) for j in jobs]
    return SweepResult("delta_D", [r for c in chunks for r in c], plan)


DEGRADATION_COLUMNS = (
    "axis_name", "axis_value", "snr_db", "delta_D", "model",
    "cap_diff", "cap_diff_se", "cap_lower_diff", "cap_lower_diff_se",
    "D_ratio", "D_known_ratio", "D_known_ratio_se",
)


def degradation_table(result: SweepResult) -> list:
    """Panels (a) C_s - C_fm, (b) C^L_s - C_fm, (c) D_s/D_fm, (d) known-symbol ratio."""
    out = []
    for row in result.records:
        if row["knowledge"] != "partial" or row["model"] == "fm":
            continue
        full = result.select(knowledge="full", model=row["model"], snr_db=row["snr_db"],
                             delta_D=row["delta_D"])[0]
        entry = {k: row[k] for k in DEGRADATION_COLUMNS if k in row}
        entry["D_known_ratio"] = full["D_known_ratio"]
        entry["D_known_ratio_se"] = full["D_known_ratio_se"]
        out.append(entry)
    return out

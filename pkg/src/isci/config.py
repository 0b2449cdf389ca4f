"""TOML run configuration: loading, validation and conversion to a sweep plan."""

from __future__ import annotations

import copy
import math
import sys
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel_stats import QuadratureSpec
from .experiments import DEFAULT_SNR_AXIS, DEFAULT_SPREAD_AXIS, SweepPlan
from .grid import GridConfig

DEFAULT_CONFIG_NAME = "default.toml"
FORMATS = ("csv", "svg")


class ConfigError(ValueError):
    """Schema violation; ``path`` is the dotted field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


# section -> field -> (kind, required)
_SCHEMA = {
    "grid": {"M": ("posint", True), "N": ("posint", True), "T": ("posfloat", True), "F": ("posfloat", True)},
    "pulse": {"kind": ("str", True)},
    "scattering": {"delta_D": ("nonnegfloat", False), "tau_D": ("nonnegfloat", False),
                   "nu_D": ("nonnegfloat", False), "spread_ratio": ("posfloat", False)},
    "layout": {"pilot_stride_m": ("posint", True), "pilot_stride_n": ("posint", True),
               "sigma_p": ("posfloat", True), "sigma_d2": ("posfloat", True)},
    "noise": {"snr_db": ("floatlist", False), "sigma_n2": ("posfloatlist", False)},
    "mc": {"draws": ("posint", True), "data_draws": ("posint", True), "seed": ("nonnegint", True),
           "path_count": ("posint", False), "workers": ("posint", False)},
    "quadrature": {"nodes_per_axis": ("posint", False), "convergence_tol": ("posfloat", False),
                   "probe_count": ("nonnegint", False)},
    "sweep": {"axis": ("str", True), "values": ("floatlist", True)},
    "output": {"dir": ("str", True), "formats": ("strlist", True)},
}
_OPTIONAL_SECTIONS = ("quadrature",)
# setting a field of one group clears the default fields of the other
_EXCLUSIVE = {
    "scattering": (("delta_D", "spread_ratio"), ("tau_D", "nu_D")),
    "noise": (("snr_db",), ("sigma_n2",)),
}


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _check(kind, value, path):
    def bad(msg):
        raise ConfigError(path, f"{msg}, got {value!r}")

    if kind in ("posint", "nonnegint"):
        if not isinstance(value, int) or isinstance(value, bool):
            bad("expected an integer")
        if value < (1 if kind == "posint" else 0):
            bad("expected a positive integer" if kind == "posint" else "expected a non-negative integer")
        return value
    if kind in ("posfloat", "nonnegfloat"):
        if not _is_number(value):
            bad("expected a finite number")
        if value <= 0 if kind == "posfloat" else value < 0:
            bad("expected a positive number" if kind == "posfloat" else "expected a non-negative number")
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            bad("expected a string")
        return value
    if kind in ("floatlist", "posfloatlist", "strlist"):
        if not isinstance(value, list) or not value:
            bad("expected a nonempty list")
        out = []
        for i, v in enumerate(value):
            sub = f"{path}[{i}]"
            if kind == "strlist":
                out.append(_check("str", v, sub))
            else:
                out.append(_check("posfloat" if kind == "posfloatlist" else "float", v, sub))
        return out
    if kind == "float":
        if not _is_number(value):
            bad("expected a finite number")
        return float(value)
    raise AssertionError(kind)


def default_config_text() -> str:
    return resources.files("isci").joinpath(DEFAULT_CONFIG_NAME).read_text(encoding="utf-8")


def default_config() -> dict:
    return tomllib.loads(default_config_text())


def load_config(path=None, overrides=()) -> dict:
    """Read and validate a config; ``None`` means the shipped default.

    ``overrides`` are ``"section.key=value"`` strings with TOML values. Fields
    absent from the file fall back to the shipped defaults.
    """
    if path is None:
        raw = default_config()
    else:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            raw = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("", f"cannot parse {path}: {exc}") from exc
        raw = _merge(default_config(), raw)
    for item in overrides:
        _apply_override(raw, item)
    return validate(raw)


def _merge(base, update):
    out = copy.deepcopy(base)
    for section, body in update.items():
        if isinstance(body, dict) and isinstance(out.get(section), dict):
            for name in body:
                _clear_exclusive(out[section], section, name)
            out[section].update(body)
        else:
            out[section] = body
    return out


def _clear_exclusive(body, section, name):
    for group in _EXCLUSIVE.get(section, ()):
        if name not in group:
            continue
        for other in _EXCLUSIVE[section]:
            if other is not group:
                for k in other:
                    body.pop(k, None)


def _apply_override(raw, item):
    key, sep, text = item.partition("=")
    section, dot, field = key.strip().partition(".")
    if not sep or not dot or not field:
        raise ConfigError(key.strip(), "override must look like section.key=value")
    try:
        value = tomllib.loads(f"v = {text.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = text.strip()
    raw.setdefault(section, {})
    if not isinstance(raw[section], dict):
        raise ConfigError(section, "expected a table")
    _clear_exclusive(raw[section], section, field)
    raw[section][field] = value


def validate(raw: dict) -> dict:
    """Check ``raw`` against the schema and return a normalized copy."""
    if not isinstance(raw, dict):
        raise ConfigError("", "config must be a table")
    out = {}
    for section in raw:
        if section not in _SCHEMA:
            raise ConfigError(section, "unknown section")
    for section, fields in _SCHEMA.items():
        body = raw.get(section)
        if body is None:
            if section in _OPTIONAL_SECTIONS:
                out[section] = {}
                continue
            raise ConfigError(section, "missing section")
        if not isinstance(body, dict):
            raise ConfigError(section, "expected a table")
        for name in body:
            if name not in fields:
                raise ConfigError(f"{section}.{name}", "unknown field")
        norm = {}
        for name, (kind, required) in fields.items():
            path = f"{section}.{name}"
            if name not in body:
                if required:
                    raise ConfigError(path, "missing required field")
                continue
            norm[name] = _check(kind, body[name], path)
        out[section] = norm

    if out["pulse"]["kind"] != "rect":
        raise ConfigError("pulse.kind", f"unsupported prototype {out['pulse']['kind']!r}; only 'rect' is available")
    sc = out["scattering"]
    explicit = [k for k in ("tau_D", "nu_D") if k in sc]
    if explicit and len(explicit) != 2:
        raise ConfigError("scattering", "tau_D and nu_D must be given together")
    if explicit and ("delta_D" in sc or "spread_ratio" in sc):
        raise ConfigError("scattering", "give either delta_D (with optional spread_ratio) or tau_D/nu_D, not both")
    if not explicit and "delta_D" not in sc:
        raise ConfigError("scattering.delta_D", "missing required field")
    if explicit and (sc["tau_D"] == 0) != (sc["nu_D"] == 0):
        raise ConfigError("scattering", "tau_D and nu_D must both be zero or both positive")
    noise = out["noise"]
    if ("snr_db" in noise) == ("sigma_n2" in noise):
        raise ConfigError("noise", "give exactly one of snr_db or sigma_n2")
    if out["sweep"]["axis"] not in ("snr_db", "delta_D"):
        raise ConfigError("sweep.axis", f"expected 'snr_db' or 'delta_D', got {out['sweep']['axis']!r}")
    if out["sweep"]["axis"] == "delta_D":
        for i, v in enumerate(out["sweep"]["values"]):
            if v < 0:
                raise ConfigError(f"sweep.values[{i}]", f"spread factor must be non-negative, got {v!r}")
    for i, f in enumerate(out["output"]["formats"]):
        if f not in FORMATS:
            raise ConfigError(f"output.formats[{i}]", f"expected one of {FORMATS}, got {f!r}")
    if out["mc"]["draws"] < 2:
        raise ConfigError("mc.draws", "expected at least 2 draws")
    g = out["grid"]
    for axis, size, stride in (("m", g["M"], out["layout"]["pilot_stride_m"]),
                               ("n", g["N"], out["layout"]["pilot_stride_n"])):
        if stride > size:
            raise ConfigError(f"layout.pilot_stride_{axis}", f"stride {stride} exceeds the grid size {size}")
    return out


def scattering_parameters(cfg: dict) -> tuple[float, float]:
    """``(delta_D, spread_ratio)`` for the configured support."""
    sc, g = cfg["scattering"], cfg["grid"]
    if "tau_D" in sc:
        tau, nu = sc["tau_D"], sc["nu_D"]
        if tau == 0:
            return 0.0, 1.0
        return tau * nu, (tau / g["T"]) / (nu / g["F"])
    return sc["delta_D"], sc.get("spread_ratio", 1.0)


def build_plan(cfg: dict, axis: str, cache_dir=None) -> SweepPlan:
    """Sweep plan for ``axis``; the ``[sweep]`` values apply when their axis matches."""
    g, lay, mc, q = cfg["grid"], cfg["layout"], cfg["mc"], cfg["quadrature"]
    delta, ratio = scattering_parameters(cfg)
    if cfg["sweep"]["axis"] == axis:
        values = tuple(cfg["sweep"]["values"])
    else:
        values = DEFAULT_SNR_AXIS if axis == "snr_db" else DEFAULT_SPREAD_AXIS
    noise = cfg["noise"]
    quad = QuadratureSpec(**{k: q[k] for k in ("nodes_per_axis", "convergence_tol", "probe_count") if k in q})
    kwargs = dict(
        axis=axis, values=values,
        grid=GridConfig(M=g["M"], N=g["N"], T=g["T"], F=g["F"]),
        pulse=cfg["pulse"]["kind"],
        pilot_strides=(lay["pilot_stride_m"], lay["pilot_stride_n"]),
        sigma_p=lay["sigma_p"], sigma_d2=lay["sigma_d2"],
        delta_D=delta, spread_ratio=ratio,
        draws=mc["draws"], data_draws=mc["data_draws"], seed=mc["seed"],
        quad=quad, cache_dir=cache_dir,
    )
    if "path_count" in mc:
        kwargs["path_count"] = mc["path_count"]
    if "workers" in mc:
        kwargs["workers"] = mc["workers"]
    if "snr_db" in noise:
        kwargs["snr_db"] = tuple(noise["snr_db"])
    elif axis == "delta_D":
        kwargs["noise_variances"] = tuple(noise["sigma_n2"])
    return SweepPlan(**kwargs)

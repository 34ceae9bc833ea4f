"""Plain-text key=value configuration files and shipped presets.

Every key carries its unit in its name (``atten_db_per_km``), unknown
keys are hard errors, and values outside the physical domain implied by
the unit raise ``UnitViolation``. Preset files additionally mark each
numeric value with exactly one provenance tag: ``[PAPER]`` (measured
hardware figure), ``[ASSUMED]`` (unpublished, chosen here), or
``[CALIBRATED]`` (fitted to a reported result). See docs/config.md.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources

from .coexistence import CoexistenceScenario, PairSource
from .errors import MissingKey, ParseError, UnitViolation, UnknownKey
from .event_sim import ClockError, SimRun
from .link_model import ClassicalCarrier, DetectorModel, FiberLink

# Air-core group delay used to derive default propagation delays.
_PS_PER_KM = 3.336e6

_NON_NEGATIVE = ("non-negative", lambda v: v >= 0)
_POSITIVE = ("positive", lambda v: v > 0)
_FRACTION = ("within [0, 1]", lambda v: 0.0 <= v <= 1.0)
_ANY = ("finite", lambda v: True)

# key -> (kind, domain); kind "float" | "int" | "bool"
SCENARIO_KEYS = {
    "length_km": ("float", _NON_NEGATIVE),
    "atten_db_per_km": ("float", _NON_NEGATIVE),
    "gvd_ps_nm_km": ("float", _ANY),
    "rho_fwd_cps_mw_km": ("float", _NON_NEGATIVE),
    "rho_bwd_cps_mw_km": ("float", _NON_NEGATIVE),
    "insertion_loss_db": ("float", _NON_NEGATIVE),
    "power_fwd_mw": ("float", _NON_NEGATIVE),
    "power_bwd_mw": ("float", _NON_NEGATIVE),
    "wavelength_nm": ("float", _POSITIVE),
    "pair_rate_cps": ("float", _NON_NEGATIVE),
    "arm_eff_local": ("float", _FRACTION),
    "arm_eff_remote": ("float", _FRACTION),
    "fwhm_bandwidth_nm": ("float", _NON_NEGATIVE),
    "det_local_efficiency": ("float", _FRACTION),
    "det_local_dark_cps": ("float", _NON_NEGATIVE),
    "det_local_jitter_sigma_ps": ("float", _NON_NEGATIVE),
    "det_local_dead_time_ns": ("float", _NON_NEGATIVE),
    "det_remote_efficiency": ("float", _FRACTION),
    "det_remote_dark_cps": ("float", _NON_NEGATIVE),
    "det_remote_jitter_sigma_ps": ("float", _NON_NEGATIVE),
    "det_remote_dead_time_ns": ("float", _NON_NEGATIVE),
    "window_ps": ("float", _POSITIVE),
    "dcm_engaged": ("bool", _ANY),
}

SIM_KEYS = {
    "duration_s": ("float", _POSITIVE),
    "seed": ("int", _NON_NEGATIVE),
    "clock_offset_ps": ("float", _ANY),
    "clock_drift_ps_per_s": ("float", _ANY),
    "clock_white_pm_sigma_ps": ("float", _NON_NEGATIVE),
    "link_delay_ab_ps": ("float", _NON_NEGATIVE),
    "link_delay_ba_ps": ("float", _NON_NEGATIVE),
    "interval_s": ("float", _POSITIVE),
}

ALL_KEYS = {**SCENARIO_KEYS, **SIM_KEYS}

SIM_DEFAULTS = {
    "duration_s": 10.0,
    "seed": 0,
    "clock_offset_ps": 0.0,
    "clock_drift_ps_per_s": 0.0,
    "clock_white_pm_sigma_ps": 0.0,
    "interval_s": 1.0,
}

_MARKER_RE = re.compile(r"\[(PAPER|ASSUMED|CALIBRATED)\]")

PRESET_NAMES = ("paper-122km", "paper-54km-scan", "next-gen")


@dataclass(frozen=True)
class LoadedConfig:
    """Parsed configuration: raw values, per-key provenance markers
    (None when a line carried no tag), and the source name."""

    name: str
    values: dict
    provenance: dict


def _parse_value(key: str, raw: str, lineno: int):
    kind, (domain_desc, domain_ok) = ALL_KEYS[key]
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        value = int(raw) if kind == "int" else float(raw)
    except ValueError as exc:
        raise ParseError(
            f"line {lineno}: cannot parse {key} value {raw!r}", line=lineno
        ) from exc
    if kind == "float" and not math.isfinite(value):
        raise UnitViolation(f"line {lineno}: {key} must be finite")
    if not domain_ok(value):
        raise UnitViolation(
            f"line {lineno}: {key} = {value!r} violates its unit domain "
            f"({domain_desc})"
        )
    return value


def parse_config_text(text: str, name: str = "<config>") -> LoadedConfig:
    values: dict = {}
    provenance: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError(f"line {lineno}: expected key = value", line=lineno)
        key_part, value_part = stripped.split("=", 1)
        key = key_part.strip()
        comment = ""
        if "#" in value_part:
            value_part, comment = value_part.split("#", 1)
        if key not in ALL_KEYS:
            raise UnknownKey(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ParseError(f"line {lineno}: duplicate key {key!r}", line=lineno)
        values[key] = _parse_value(key, value_part, lineno)
        markers = _MARKER_RE.findall(comment)
        provenance[key] = markers[0] if len(markers) == 1 else (markers or None)
    missing = [k for k in SCENARIO_KEYS if k not in values]
    if missing:
        raise MissingKey(f"missing required keys: {', '.join(missing)}")
    return LoadedConfig(name=name, values=values, provenance=provenance)


def load_config(path) -> LoadedConfig:
    with open(path) as fh:
        text = fh.read()
    return parse_config_text(text, name=str(path))


def format_config(values: dict) -> str:
    """Canonical text form (schema key order); floats use repr so a
    save/load round trip is value-identical."""
    lines = []
    for key in ALL_KEYS:
        if key not in values:
            continue
        value = values[key]
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, int):
            rendered = str(value)
        else:
            rendered = repr(float(value))
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


def save_config(values: dict, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_config(values))


def build_scenario(cfg: LoadedConfig) -> CoexistenceScenario:
    v = cfg.values
    link = FiberLink(
        length_km=v["length_km"],
        atten_db_per_km=v["atten_db_per_km"],
        gvd_ps_nm_km=v["gvd_ps_nm_km"],
        rho_fwd_cps_mw_km=v["rho_fwd_cps_mw_km"],
        rho_bwd_cps_mw_km=v["rho_bwd_cps_mw_km"],
        insertion_loss_db=v["insertion_loss_db"],
    )
    carrier = ClassicalCarrier(
        power_fwd_mw=v["power_fwd_mw"],
        power_bwd_mw=v["power_bwd_mw"],
        wavelength_nm=v["wavelength_nm"],
    )
    source = PairSource(
        pair_rate_cps=v["pair_rate_cps"],
        arm_eff_local=v["arm_eff_local"],
        arm_eff_remote=v["arm_eff_remote"],
        fwhm_bandwidth_nm=v["fwhm_bandwidth_nm"],
    )

    def det(prefix: str) -> DetectorModel:
        return DetectorModel(
            efficiency=v[f"{prefix}_efficiency"],
            dark_rate_cps=v[f"{prefix}_dark_cps"],
            jitter_sigma_ps=v[f"{prefix}_jitter_sigma_ps"],
            dead_time_ns=v[f"{prefix}_dead_time_ns"],
        )

    return CoexistenceScenario(
        link=link,
        carrier=carrier,
        source=source,
        det_local=det("det_local"),
        det_remote=det("det_remote"),
        window_ps=v["window_ps"],
        dcm_engaged=v["dcm_engaged"],
    )


def build_sim_run(cfg: LoadedConfig, **overrides) -> SimRun:
    """SimRun from a config; keyword overrides win over file values and
    defaults. Missing link delays default to the air-core propagation
    time for the configured length."""
    v = dict(cfg.values)
    v.update({k: val for k, val in overrides.items() if val is not None})
    default_delay = round(v["length_km"] * _PS_PER_KM)
    merged = {**SIM_DEFAULTS, **{k: v[k] for k in SIM_KEYS if k in v}}
    clock = ClockError(
        offset_ps=merged["clock_offset_ps"],
        drift_ps_per_s=merged["clock_drift_ps_per_s"],
        white_pm_sigma_ps=merged["clock_white_pm_sigma_ps"],
    )
    return SimRun(
        scenario=build_scenario(cfg),
        duration_s=merged["duration_s"],
        seed=int(merged["seed"]),
        clock_error=clock,
        link_delay_ab_ps=merged.get("link_delay_ab_ps", default_delay),
        link_delay_ba_ps=merged.get("link_delay_ba_ps", default_delay),
    )


def list_presets() -> tuple[str, ...]:
    return PRESET_NAMES


def load_preset(name: str) -> LoadedConfig:
    """Load a shipped preset and enforce that every numeric value carries
    exactly one provenance marker."""
    if name not in PRESET_NAMES:
        raise UnknownKey(f"unknown preset {name!r}; have {', '.join(PRESET_NAMES)}")
    text = (
        resources.files("hollowlink").joinpath(f"presets/{name}.cfg").read_text()
    )
    cfg = parse_config_text(text, name=name)
    for key, value in cfg.values.items():
        if isinstance(value, bool):
            continue
        marker = cfg.provenance.get(key)
        if not isinstance(marker, str):
            raise ParseError(
                f"preset {name}: key {key} must carry exactly one provenance marker"
            )
    return cfg

def preset_text(name: str) -> str:
    if name not in PRESET_NAMES:
        raise UnknownKey(f"unknown preset {name!r}")
    return resources.files("hollowlink").joinpath(f"presets/{name}.cfg").read_text()

"""Time-deviation and Allan-deviation estimators plus white-noise
synthesizers.

Overlapping estimators throughout. Both statistics are built from the
same second-difference sums, so the algebraic identity
TDEV(tau) = tau/sqrt(3) * MDEV(tau) holds exactly. Confidence intervals
use a deliberately conservative chi-square approximation (block-counted
degrees of freedom), adequate for the white noise types handled here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .errors import SeriesTooShort, TooFewPoints


@dataclass(frozen=True)
class PhaseSeries:
    """Evenly sampled time-error series x_i, in seconds."""

    tau0_s: float
    x_s: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "x_s", np.ascontiguousarray(self.x_s, dtype=np.float64)
        )
        if self.tau0_s <= 0:
            raise ValueError("tau0_s must be > 0")
        if self.x_s.size < 4:
            raise ValueError("need at least 4 samples")

    @classmethod
    def from_offset_series(cls, series) -> "PhaseSeries":
        """Convert a picosecond OffsetSeries into a PhaseSeries (seconds)."""
        return cls(tau0_s=series.interval_s, x_s=series.offsets_ps * 1e-12)


@dataclass(frozen=True)
class StabilityCurve:
    """Deviation values and chi-square confidence bounds per averaging time."""

    taus_s: np.ndarray
    devs: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    n_used: np.ndarray

    def points(self):
        return list(zip(self.taus_s, self.devs, self.ci_lo, self.ci_hi, self.n_used))


def _second_diffs(x: np.ndarray, m: int) -> np.ndarray:
    return x[2 * m :] - 2.0 * x[m:-m] + x[: -2 * m]


def _window_sums(d: np.ndarray, m: int) -> np.ndarray:
    cs = np.concatenate(([0.0], np.cumsum(d)))
    return cs[m:] - cs[:-m]


def _default_ms(n: int, min_len_factor: int) -> list[int]:
    ms, m = [], 1
    while n >= min_len_factor * m + 1:
        ms.append(m)
        m *= 2
    return ms


def _ci(dev: float, edf: float) -> tuple[float, float]:
    if dev == 0.0:
        return 0.0, 0.0
    lo = dev * math.sqrt(edf / chi2.ppf(0.975, edf))
    hi = dev * math.sqrt(edf / chi2.ppf(0.025, edf))
    return lo, hi


def tdev(series: PhaseSeries, ms: list[int] | None = None) -> StabilityCurve:
    """Overlapping time deviation at averaging times m * tau0 (octave grid
    by default)."""
    x = series.x_s
    n = x.size
    ms = ms if ms is not None else _default_ms(n, 3)
    taus, devs, los, his, counts = [], [], [], [], []
    for m in ms:
        m = int(m)
        if n < 3 * m + 1:
            raise SeriesTooShort(f"need N >= 3m+1 = {3 * m + 1}, have {n}", m=m)
        sums = _window_sums(_second_diffs(x, m), m)
        var = float(np.sum(sums**2)) / (6.0 * m * m * sums.size)
        taus.append(m * series.tau0_s)
        devs.append(math.sqrt(var))
        lo, hi = _ci(devs[-1], max(1.0, (n - 1) // (3 * m)))
        los.append(lo)
        his.append(hi)
        counts.append(sums.size)
    return StabilityCurve(
        np.array(taus), np.array(devs), np.array(los), np.array(his),
        np.array(counts, dtype=np.int64),
    )


def mdev(series: PhaseSeries, ms: list[int] | None = None) -> StabilityCurve:
    """Overlapping modified Allan deviation; shares its core sums with
    tdev, so tdev = tau/sqrt(3) * mdev exactly."""
    base = tdev(series, ms)
    devs = base.devs * math.sqrt(3.0) / base.taus_s
    scale = devs / np.where(base.devs > 0, base.devs, 1.0)
    return StabilityCurve(
        base.taus_s, devs, base.ci_lo * scale, base.ci_hi * scale, base.n_used
    )


def adev(series: PhaseSeries, ms: list[int] | None = None) -> StabilityCurve:
    """Overlapping Allan deviation at averaging times m * tau0."""
    x = series.x_s
    n = x.size
    ms = ms if ms is not None else _default_ms(n, 2)
    taus, devs, los, his, counts = [], [], [], [], []
    for m in ms:
        m = int(m)
        if n < 2 * m + 1:
            raise SeriesTooShort(f"need N >= 2m+1 = {2 * m + 1}, have {n}", m=m)
        d = _second_diffs(x, m)
        var = float(np.sum(d**2)) / (2.0 * (m * series.tau0_s) ** 2 * d.size)
        taus.append(m * series.tau0_s)
        devs.append(math.sqrt(var))
        lo, hi = _ci(devs[-1], max(1.0, (n - 1) // (2 * m)))
        los.append(lo)
        his.append(hi)
        counts.append(d.size)
    return StabilityCurve(
        np.array(taus), np.array(devs), np.array(los), np.array(his),
        np.array(counts, dtype=np.int64),
    )


def synthesize_noise(
    kind: str, level: float, tau0_s: float, n: int, seed: int
) -> PhaseSeries:
    """Synthesize a power-law phase series.

    ``white-pm``: i.i.d. Gaussian x with sigma = level (seconds), so
    TDEV(tau0) = level. ``white-fm``: random-walk phase from i.i.d.
    frequency steps scaled so ADEV(tau0) = level.
    """
    if n < 4:
        raise ValueError("n must be >= 4")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    if kind == "white-pm":
        x = level * rng.standard_normal(n)
    elif kind == "white-fm":
        x = np.cumsum(level * tau0_s * rng.standard_normal(n))
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return PhaseSeries(tau0_s=tau0_s, x_s=x)


def fit_slope(
    curve: StabilityCurve, tau_range: tuple[float, float] | None = None
) -> tuple[float, float]:
    """Least-squares log-log slope of the stability curve and its stderr."""
    taus = curve.taus_s
    devs = curve.devs
    mask = devs > 0
    if tau_range is not None:
        mask &= (taus >= tau_range[0]) & (taus <= tau_range[1])
    if int(np.count_nonzero(mask)) < 3:
        raise TooFewPoints("need at least 3 positive points in range")
    lt = np.log10(taus[mask])
    ld = np.log10(devs[mask])
    k = lt.size
    t_mean = lt.mean()
    sxx = float(np.sum((lt - t_mean) ** 2))
    slope = float(np.sum((lt - t_mean) * (ld - ld.mean())) / sxx)
    resid = ld - (ld.mean() + slope * (lt - t_mean))
    var = float(np.sum(resid**2)) / max(k - 2, 1)
    return slope, math.sqrt(var / sxx)


def stability_csv(curve: StabilityCurve) -> str:
    """Stability CSV export: ``tau_s,deviation,ci_lo,ci_hi,n``."""
    lines = ["tau_s,deviation,ci_lo,ci_hi,n"]
    for tau, dev, lo, hi, n in curve.points():
        lines.append("%.12g,%.12g,%.12g,%.12g,%d" % (tau, dev, lo, hi, n))
    return "\n".join(lines) + "\n"

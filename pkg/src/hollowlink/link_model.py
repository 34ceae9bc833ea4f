"""Physical model of the hollow-core fiber channel.

Attenuation, forward/backward spontaneous Raman scattering (SpRS) noise
rates, dispersion broadening, and detector dead-time throughput. All
functions are pure; rates are in counts per second, powers in mW,
lengths in km.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Detector efficiency at which the SpRS coefficients are defined. The
# tabulated coefficients are *detected* rates (filter passband and
# detector efficiency folded in); scenarios with a different detector
# efficiency rescale them by efficiency / RHO_REFERENCE_EFFICIENCY.
RHO_REFERENCE_EFFICIENCY = 0.25

LN10 = math.log(10.0)


@dataclass(frozen=True)
class FiberLink:
    """Fiber span parameters, including lumped per-direction insertion loss.

    ``rho_fwd_cps_mw_km`` / ``rho_bwd_cps_mw_km`` are detected SpRS noise
    coefficients in counts/s per mW of launch power per km, referenced to
    the zero-attenuation limit and to ``RHO_REFERENCE_EFFICIENCY``.
    """

    length_km: float
    atten_db_per_km: float
    gvd_ps_nm_km: float
    rho_fwd_cps_mw_km: float
    rho_bwd_cps_mw_km: float
    insertion_loss_db: float = 0.0

    def __post_init__(self):
        if self.length_km < 0:
            raise ValueError("length_km must be >= 0")
        if self.atten_db_per_km < 0:
            raise ValueError("atten_db_per_km must be >= 0")
        if self.rho_fwd_cps_mw_km < 0 or self.rho_bwd_cps_mw_km < 0:
            raise ValueError("SpRS coefficients must be >= 0")
        if self.insertion_loss_db < 0:
            raise ValueError("insertion_loss_db must be >= 0")

    @property
    def alpha_np_per_km(self) -> float:
        """Attenuation in natural (1/e) units per km."""
        return LN10 * self.atten_db_per_km / 10.0


@dataclass(frozen=True)
class ClassicalCarrier:
    """Classical light sharing the fiber with the quantum signal.

    ``power_fwd_mw`` co-propagates with the quantum signal under study;
    ``power_bwd_mw`` counter-propagates (e.g. the frequency-transfer
    return light).
    """

    power_fwd_mw: float
    power_bwd_mw: float = 0.0
    wavelength_nm: float = 1550.0

    def __post_init__(self):
        if self.power_fwd_mw < 0 or self.power_bwd_mw < 0:
            raise ValueError("carrier powers must be >= 0")


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon detector: efficiency, dark rate, Gaussian jitter (1 sigma),
    and non-paralyzable dead time."""

    efficiency: float
    dark_rate_cps: float
    jitter_sigma_ps: float
    dead_time_ns: float

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must be in [0, 1]")
        if self.dark_rate_cps < 0:
            raise ValueError("dark_rate_cps must be >= 0")
        if self.jitter_sigma_ps < 0:
            raise ValueError("jitter_sigma_ps must be >= 0")
        if self.dead_time_ns < 0:
            raise ValueError("dead_time_ns must be >= 0")


def channel_transmittance(link: FiberLink) -> float:
    """Power transmittance of the span including insertion loss, in (0, 1]."""
    total_db = link.atten_db_per_km * link.length_km + link.insertion_loss_db
    return 10.0 ** (-total_db / 10.0)


def forward_sprs_rate(link: FiberLink, carrier: ClassicalCarrier) -> float:
    """Detected co-propagating SpRS rate at the receiving end (counts/s).

    Noise generated at position z scales with the attenuated pump
    P * exp(-a z) and is itself attenuated over the remaining L - z, so
    the integral collapses to an effective length L * exp(-a L).
    """
    a = link.alpha_np_per_km
    l_eff = link.length_km * math.exp(-a * link.length_km)
    return link.rho_fwd_cps_mw_km * carrier.power_fwd_mw * l_eff


def backward_sprs_rate(link: FiberLink, carrier: ClassicalCarrier) -> float:
    """Detected counter-propagating SpRS rate at the receiving end (counts/s).

    Pump and scattered photon both traverse the distance from the far
    end, giving an effective length (1 - exp(-2 a L)) / (2 a), which
    tends to L as the attenuation vanishes.
    """
    a = link.alpha_np_per_km
    if a == 0.0:
        l_eff = link.length_km
    else:
        l_eff = -math.expm1(-2.0 * a * link.length_km) / (2.0 * a)
    return link.rho_bwd_cps_mw_km * carrier.power_bwd_mw * l_eff


def dispersion_broadening(link: FiberLink, fwhm_bandwidth_nm: float) -> float:
    """FWHM-scale temporal broadening |GVD| * bandwidth * length, in ps.

    Callers that engage nonlocal dispersion cancellation simply skip
    this term.
    """
    if fwhm_bandwidth_nm < 0:
        raise ValueError("fwhm_bandwidth_nm must be >= 0")
    return abs(link.gvd_ps_nm_km) * fwhm_bandwidth_nm * link.length_km


def dead_time_throughput(true_rate_cps: float, det: DetectorModel) -> float:
    """Measured rate after non-paralyzable dead time: R / (1 + R * tau_d)."""
    if true_rate_cps < 0:
        raise ValueError("true_rate_cps must be >= 0")
    tau_s = det.dead_time_ns * 1e-9
    return true_rate_cps / (1.0 + true_rate_cps * tau_s)

"""Monte Carlo generation of detector timestamp streams.

Produces the four single-photon-detector streams of a bidirectional
two-way session: correlated pair emissions, channel thinning, jitter and
dispersion smearing, SpRS/dark noise injection, site-B clock-error
injection, and non-paralyzable dead-time filtering.

All timestamps are 64-bit integer picoseconds. Randomness comes from
numpy's counter-based Philox generator; each stage draws from its own
stream derived from ``SeedSequence(seed, spawn_key=(stream_id,))``, so a
given ``SimRun`` reproduces bit-identical streams on any platform. The
stream-id table is fixed in ``_STREAMS`` below.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .coexistence import CoexistenceScenario, noise_rates
from .errors import UnsortedInput
from .link_model import channel_transmittance, dispersion_broadening
from .coexistence import FWHM_TO_SIGMA

PS_PER_S = 10**12

# Generation chunk: bounds memory for long high-rate runs.
_CHUNK = 4_000_000

# RNG stream ids (SeedSequence spawn keys). One stream per independent
# random stage; renumbering would silently change simulated data.
_STREAMS = {
    "pairs_ab": 0,
    "detect_local_ab": 1,
    "detect_remote_ab": 2,
    "pairs_ba": 3,
    "detect_local_ba": 4,
    "detect_remote_ba": 5,
    "sprs_fwd_ch1": 6,
    "sprs_bwd_ch1": 7,
    "dark_ch0": 8,
    "dark_ch1": 9,
    "sprs_fwd_ch3": 10,
    "sprs_bwd_ch3": 11,
    "dark_ch2": 12,
    "dark_ch3": 13,
    "clock_wpm_ch1": 14,
    "clock_wpm_ch2": 15,
}

TIMETAG_MAGIC = b"QTAGS001"


@dataclass(frozen=True)
class TimeTagStream:
    """Sorted integer-picosecond detection timestamps for one channel."""

    channel_id: int
    tags_ps: np.ndarray
    duration_ps: int

    def __post_init__(self):
        tags = np.ascontiguousarray(self.tags_ps, dtype=np.int64)
        object.__setattr__(self, "tags_ps", tags)
        if tags.size:
            if np.any(np.diff(tags) < 0):
                raise UnsortedInput("tags_ps must be sorted")
            if tags[0] < 0 or tags[-1] > self.duration_ps:
                raise ValueError("tags_ps must lie within [0, duration_ps]")

    def __len__(self):
        return int(self.tags_ps.size)

    @property
    def rate_cps(self) -> float:
        if self.duration_ps == 0:
            return 0.0
        return self.tags_ps.size * PS_PER_S / self.duration_ps


@dataclass(frozen=True)
class ClockError:
    """Site-B clock error vs. site A: initial offset, linear drift, and
    per-detection white phase noise."""

    offset_ps: float = 0.0
    drift_ps_per_s: float = 0.0
    white_pm_sigma_ps: float = 0.0

    def __post_init__(self):
        if self.white_pm_sigma_ps < 0:
            raise ValueError("white_pm_sigma_ps must be >= 0")


@dataclass(frozen=True)
class SimRun:
    """One reproducible simulation: scenario, duration, seed, clock error,
    and the two one-way propagation delays."""

    scenario: CoexistenceScenario
    duration_s: float
    seed: int
    clock_error: ClockError = ClockError()
    link_delay_ab_ps: float = 0.0
    link_delay_ba_ps: float = 0.0

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be > 0")
        if self.duration_s > 1e6:
            # keeps int64 picoseconds far from overflow
            raise ValueError("duration_s must be < 1e6 s")

    @property
    def duration_ps(self) -> int:
        return int(round(self.duration_s * PS_PER_S))


class SimStreams(NamedTuple):
    """The four detector streams (Fig.-1-style numbering):
    ch0 local idler @A, ch1 remote signal @B, ch2 local idler @B,
    ch3 remote signal @A."""

    local_ab: TimeTagStream
    remote_ab: TimeTagStream
    local_ba: TimeTagStream
    remote_ba: TimeTagStream


def stream_rng(seed: int, name: str) -> np.random.Generator:
    """Philox generator for one named random stage of a run."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_STREAMS[name],))
    return np.random.Generator(np.random.Philox(ss))


def direction_scenario(s: CoexistenceScenario, direction: str) -> CoexistenceScenario:
    """Scenario as seen by one quantum direction. For B->A the carrier
    roles swap: the return light co-propagates, the launch light
    counter-propagates."""
    if direction == "ab":
        return s
    if direction == "ba":
        carrier = replace(
            s.carrier,
            power_fwd_mw=s.carrier.power_bwd_mw,
            power_bwd_mw=s.carrier.power_fwd_mw,
        )
        return replace(s, carrier=carrier)
    raise ValueError("direction must be 'ab' or 'ba'")


def _poisson_chunks(rate_cps: float, duration_ps: int, rng: np.random.Generator):
    """Yield sorted int64 chunks of a homogeneous Poisson process."""
    if rate_cps <= 0 or duration_ps <= 0:
        return
    scale_ps = PS_PER_S / rate_cps
    t = 0.0
    while True:
        times = t + np.cumsum(rng.exponential(scale_ps, _CHUNK))
        if times[-1] >= duration_ps:
            times = times[times < duration_ps]
            if times.size:
                yield np.rint(times).astype(np.int64)
            return
        yield np.rint(times).astype(np.int64)
        t = times[-1]


def _poisson_times(rate_cps: float, duration_ps: int, rng) -> np.ndarray:
    parts = list(_poisson_chunks(rate_cps, duration_ps, rng))
    if not parts:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(parts)


def generate_pairs(run: SimRun, source: str = "ab") -> tuple[np.ndarray, np.ndarray]:
    """Pair emission times for one source as two equal int64 arrays
    (local arm, remote arm); the intrinsic biphoton correlation time is
    treated as zero."""
    rng = stream_rng(run.seed, "pairs_ab" if source == "ab" else "pairs_ba")
    times = _poisson_times(run.scenario.source.pair_rate_cps, run.duration_ps, rng)
    return times, times.copy()


def transmit_and_detect(
    emissions_ps: np.ndarray,
    efficiency_chain: float,
    jitter_sigma_ps: float,
    extra_broadening_sigma_ps: float,
    delay_ps: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Bernoulli-thin emissions at the combined efficiency, shift by the
    propagation delay and smear with Gaussian noise of
    sqrt(jitter^2 + broadening^2); returns sorted int64 detections."""
    if jitter_sigma_ps < 0 or extra_broadening_sigma_ps < 0:
        raise ValueError("sigmas must be >= 0")
    emissions = np.asarray(emissions_ps, dtype=np.int64)
    if efficiency_chain >= 1.0:
        survivors = emissions
    else:
        survivors = emissions[rng.random(emissions.size) < efficiency_chain]
    sigma = float(np.hypot(jitter_sigma_ps, extra_broadening_sigma_ps))
    if sigma > 0:
        shift = np.rint(delay_ps + sigma * rng.standard_normal(survivors.size))
        out = survivors + shift.astype(np.int64)
        out.sort(kind="stable")
        return out
    return survivors + np.int64(round(delay_ps))


def inject_poisson_noise(
    rate_cps: float, duration_s: float, rng: np.random.Generator
) -> np.ndarray:
    """Homogeneous Poisson timestamps over [0, duration), int64 ps."""
    if rate_cps < 0:
        raise ValueError("rate_cps must be >= 0")
    return _poisson_times(rate_cps, int(round(duration_s * PS_PER_S)), rng)


def _dead_time_mask_python(tags: np.ndarray, dead_ps: int) -> np.ndarray:
    keep = np.zeros(tags.size, dtype=np.bool_)
    last = -(1 << 62)
    for i in range(tags.size):
        if tags[i] - last >= dead_ps:
            keep[i] = True
            last = tags[i]
    return keep


_dead_time_kernel = None


def _dead_time_mask(tags: np.ndarray, dead_ps: int) -> np.ndarray:
    global _dead_time_kernel
    if _dead_time_kernel is None:
        try:
            from numba import njit

            _dead_time_kernel = njit(cache=True)(_dead_time_mask_python)
        except ImportError:  # pragma: no cover - numba is a declared dep
            _dead_time_kernel = _dead_time_mask_python
    return _dead_time_kernel(tags, dead_ps)


def apply_dead_time(stream, dead_time_ns: float):
    """Non-paralyzable dead-time filter: a tag is kept iff it falls at
    least the dead time after the last kept tag. Accepts a TimeTagStream
    or a sorted int64 array and returns the same kind."""
    if isinstance(stream, TimeTagStream):
        kept = apply_dead_time(stream.tags_ps, dead_time_ns)
        return replace(stream, tags_ps=kept)
    tags = np.asarray(stream, dtype=np.int64)
    if tags.size and np.any(np.diff(tags) < 0):
        raise UnsortedInput("apply_dead_time requires sorted input")
    dead_ps = int(round(dead_time_ns * 1000.0))
    if dead_ps <= 0 or tags.size == 0:
        return tags.copy()
    return tags[_dead_time_mask(tags, dead_ps)]


def _clock_to_site_b(
    tags: np.ndarray, clock: ClockError, rng: np.random.Generator
) -> np.ndarray:
    """Express physical arrival times in site B's clock:
    t' = t*(1+y) + x0 (+ per-detection white phase noise)."""
    if tags.size == 0:
        return tags
    y = clock.drift_ps_per_s * 1e-12
    corr = clock.offset_ps + y * tags.astype(np.float64)
    if clock.white_pm_sigma_ps > 0:
        corr = corr + clock.white_pm_sigma_ps * rng.standard_normal(tags.size)
    return tags + np.rint(corr).astype(np.int64)


def _jittered(tags, sigma_ps, rng):
    if sigma_ps <= 0 or tags.size == 0:
        return tags
    shift = np.rint(sigma_ps * rng.standard_normal(tags.size)).astype(np.int64)
    return tags + shift


def _finalize(parts, duration_ps, dead_time_ns, channel_id) -> TimeTagStream:
    """Merge source streams (stable sort keeps the documented
    signal < sprs_fwd < sprs_bwd < dark order at equal times), clip to the
    observation window, and apply dead time."""
    merged = np.concatenate([p for p in parts if p.size] or [np.empty(0, np.int64)])
    merged.sort(kind="stable")
    merged = merged[(merged >= 0) & (merged <= duration_ps)]
    kept = apply_dead_time(merged, dead_time_ns)
    return TimeTagStream(channel_id=channel_id, tags_ps=kept, duration_ps=duration_ps)


def run_scenario(run: SimRun) -> SimStreams:
    """Simulate the full bidirectional session and return the four
    detector streams. Deterministic given the run (seed included)."""
    s = run.scenario
    duration_ps = run.duration_ps
    sigma_disp = 0.0
    if not s.dcm_engaged:
        sigma_disp = (
            dispersion_broadening(s.link, s.source.fwhm_bandwidth_nm) / FWHM_TO_SIGMA
        )
    t_link = channel_transmittance(s.link)
    p_local = s.source.arm_eff_local * s.det_local.efficiency
    p_remote = s.source.arm_eff_remote * t_link * s.det_remote.efficiency
    sigma_remote = float(np.hypot(s.det_remote.jitter_sigma_ps, sigma_disp))
    clock = run.clock_error

    channels = []
    for direction, delay_ps in (("ab", run.link_delay_ab_ps), ("ba", run.link_delay_ba_ps)):
        rng_pairs = stream_rng(run.seed, f"pairs_{direction}")
        rng_loc = stream_rng(run.seed, f"detect_local_{direction}")
        rng_rem = stream_rng(run.seed, f"detect_remote_{direction}")
        # Site B records ch1 (remote of A->B) and ch2 (local of B->A).
        remote_at_b = direction == "ab"
        rng_wpm = stream_rng(run.seed, "clock_wpm_ch1" if remote_at_b else "clock_wpm_ch2")
        delay_int = round(delay_ps)

        loc_parts, rem_parts = [], []
        for chunk in _poisson_chunks(s.source.pair_rate_cps, duration_ps, rng_pairs):
            loc = chunk[rng_loc.random(chunk.size) < p_local]
            if not remote_at_b:  # local arm of EPS-B sits at site B
                loc = _clock_to_site_b(loc, clock, rng_wpm)
            loc_parts.append(_jittered(loc, s.det_local.jitter_sigma_ps, rng_loc))

            rem = chunk[rng_rem.random(chunk.size) < p_remote] + np.int64(delay_int)
            if remote_at_b:
                rem = _clock_to_site_b(rem, clock, rng_wpm)
            rem_parts.append(_jittered(rem, sigma_remote, rng_rem))

        ds = direction_scenario(s, direction)
        n_f, n_b = noise_rates(ds)
        suffix = "ch1" if direction == "ab" else "ch3"
        noise_f = _poisson_times(n_f, duration_ps, stream_rng(run.seed, f"sprs_fwd_{suffix}"))
        noise_b = _poisson_times(n_b, duration_ps, stream_rng(run.seed, f"sprs_bwd_{suffix}"))
        if remote_at_b:
            noise_f = _clock_to_site_b(noise_f, clock, rng_wpm)
            noise_b = _clock_to_site_b(noise_b, clock, rng_wpm)

        loc_ch = "ch0" if direction == "ab" else "ch2"
        rem_ch = "ch1" if direction == "ab" else "ch3"
        dark_loc = _poisson_times(
            s.det_local.dark_rate_cps, duration_ps, stream_rng(run.seed, f"dark_{loc_ch}")
        )
        dark_rem = _poisson_times(
            s.det_remote.dark_rate_cps, duration_ps, stream_rng(run.seed, f"dark_{rem_ch}")
        )

        local_parts = loc_parts + [dark_loc]
        remote_parts = rem_parts + [noise_f, noise_b, dark_rem]
        channels.append(
            _finalize(local_parts, duration_ps, s.det_local.dead_time_ns, int(loc_ch[2:]))
        )
        channels.append(
            _finalize(remote_parts, duration_ps, s.det_remote.dead_time_ns, int(rem_ch[2:]))
        )

    ch0, ch1, ch2, ch3 = channels
    return SimStreams(local_ab=ch0, remote_ab=ch1, local_ba=ch2, remote_ba=ch3)


def write_timetags_binary(path, stream: TimeTagStream) -> None:
    """Binary timetag file: 8-byte magic, little-endian uint16 channel id,
    then little-endian int64 picosecond values."""
    with open(path, "wb") as fh:
        fh.write(TIMETAG_MAGIC)
        fh.write(struct.pack("<H", stream.channel_id))
        fh.write(stream.tags_ps.astype("<i8").tobytes())


def read_timetags_binary(path) -> TimeTagStream:
    """Read a binary timetag file. The format carries no duration, so the
    stream's duration is reconstructed as its last tag."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != TIMETAG_MAGIC:
            raise ValueError(f"bad timetag magic {magic!r}")
        (channel_id,) = struct.unpack("<H", fh.read(2))
        tags = np.frombuffer(fh.read(), dtype="<i8").astype(np.int64)
    duration = int(tags[-1]) if tags.size else 0
    return TimeTagStream(channel_id=channel_id, tags_ps=tags, duration_ps=duration)


def write_timetags_csv(path, streams) -> None:
    """CSV alternative: header ``channel,timestamp_ps``, one row per tag."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["channel", "timestamp_ps"])
        for stream in streams:
            for tag in stream.tags_ps:
                writer.writerow([stream.channel_id, int(tag)])


def read_timetags_csv(path) -> list[TimeTagStream]:
    by_channel: dict[int, list[int]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["channel", "timestamp_ps"]:
            raise ValueError(f"bad timetag CSV header {header!r}")
        for row in reader:
            by_channel.setdefault(int(row[0]), []).append(int(row[1]))
    streams = []
    for channel_id in sorted(by_channel):
        tags = np.array(by_channel[channel_id], dtype=np.int64)
        duration = int(tags[-1]) if tags.size else 0
        streams.append(
            TimeTagStream(channel_id=channel_id, tags_ps=tags, duration_ps=duration)
        )
    return streams

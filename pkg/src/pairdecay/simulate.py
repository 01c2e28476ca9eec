"""Monte Carlo generation of per-pair photon emission histories.

Each pair emits a first photon at a time drawn from Exp(gamma_f) (the
pair clock starts at its formation, t = 0), a fair coin decides which
atom emitted, and the surviving atom emits the second photon after an
independent Exp(gamma_s) delay.  An optional detector model thins photons
by a per-photon efficiency and smears the observed times with Gaussian
timing jitter plus a per-pair formation-time offset; true times always
stay on the pair-formation clock.

Reproducibility: every random draw is a pure function of (seed, pair_id,
draw slot) through per-pair SplitMix64 streams, so the generated arrays
do not depend on iteration order, chunking, or thread count.
"""

from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .histogram import Histogram
from .kinetics import PopulationState, RateParameters

FORMATION_PROFILES = ("delta", "gaussian", "uniform")

# SplitMix64 constants (Steele, Lea & Flood; java.util.SplittableRandom).
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_2 = np.uint64(0x94D049BB133111EB)

# Fixed draw slots per pair, so a given random number never depends on
# detector configuration or generation order.
_SLOT_T_F = 0
_SLOT_COIN = 1
_SLOT_DT = 2
_SLOT_DET_F = 3
_SLOT_DET_S = 4
_SLOT_OFFSET_U1 = 5
_SLOT_OFFSET_U2 = 6
_SLOT_JITTER_U1 = 7
_SLOT_JITTER_U2 = 8


@dataclass(frozen=True)
class DetectorModel:
    """Per-photon detection efficiency and timing response.

    formation_profile describes the distribution of the true pair
    formation time around the nominal t = 0: "delta" (exact), "gaussian"
    (formation_width is the standard deviation) or "uniform"
    (formation_width is the full width, centered on 0).  The default is
    the ideal detector: everything detected, no jitter, delta profile.
    """

    efficiency: float = 1.0
    jitter_sigma: float = 0.0
    formation_profile: str = "delta"
    formation_width: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.efficiency <= 1.0):
            raise ParameterError(f"efficiency must be in [0, 1], got {self.efficiency}")
        if not (math.isfinite(self.jitter_sigma) and self.jitter_sigma >= 0.0):
            raise ParameterError(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")
        if self.formation_profile not in FORMATION_PROFILES:
            raise ParameterError(
                f"formation_profile must be one of {FORMATION_PROFILES}, "
                f"got {self.formation_profile!r}"
            )
        if not (math.isfinite(self.formation_width) and self.formation_width >= 0.0):
            raise ParameterError(
                f"formation_width must be >= 0, got {self.formation_width}"
            )
        if self.formation_profile == "delta" and self.formation_width != 0.0:
            raise ParameterError("delta profile must have formation_width == 0")

    @property
    def is_ideal(self) -> bool:
        return (
            self.efficiency == 1.0
            and self.jitter_sigma == 0.0
            and self.formation_profile == "delta"
        )


@dataclass(frozen=True)
class DecayEvent:
    """One pair's simulated history."""

    pair_id: int
    t_f: float
    t_s: float
    first_emitter: str  # "A" | "B"
    detected_f: bool
    detected_s: bool
    t_f_obs: float
    t_s_obs: float


class _EventView(Sequence):
    """Lazy sequence of DecayEvent records over the column arrays."""

    def __init__(self, event_set: "EventSet"):
        self._ev = event_set

    def __len__(self) -> int:
        return len(self._ev)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        return self._ev[index]


@dataclass(frozen=True)
class EventSet:
    """Column-oriented collection of decay events plus its provenance.

    Regenerating with identical (params, detector, seed, n_pairs) yields
    bit-identical arrays.  first_emitter is stored as 0 for A, 1 for B.
    """

    params: RateParameters
    detector: DetectorModel
    seed: int
    pair_id: np.ndarray
    t_f: np.ndarray
    t_s: np.ndarray
    first_emitter: np.ndarray
    detected_f: np.ndarray
    detected_s: np.ndarray
    t_f_obs: np.ndarray
    t_s_obs: np.ndarray

    def __len__(self) -> int:
        return self.pair_id.size

    def __getitem__(self, index: int) -> DecayEvent:
        i = int(index)
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(index)
        return DecayEvent(
            pair_id=int(self.pair_id[i]),
            t_f=float(self.t_f[i]),
            t_s=float(self.t_s[i]),
            first_emitter="A" if self.first_emitter[i] == 0 else "B",
            detected_f=bool(self.detected_f[i]),
            detected_s=bool(self.detected_s[i]),
            t_f_obs=float(self.t_f_obs[i]),
            t_s_obs=float(self.t_s_obs[i]),
        )

    def __iter__(self) -> Iterator[DecayEvent]:
        for i in range(len(self)):
            yield self[i]

    @property
    def events(self) -> Sequence:
        return _EventView(self)

    def separations(self, use_observed: bool = False) -> np.ndarray:
        """Photon time separations |t_s - t_f| (true or observed)."""
        if use_observed:
            return np.abs(self.t_s_obs - self.t_f_obs)
        return self.t_s - self.t_f


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX_1
    z = (z ^ (z >> np.uint64(27))) * _MIX_2
    return z ^ (z >> np.uint64(31))


def _uniforms(seed: int, pair_ids: np.ndarray, slot: int) -> np.ndarray:
    """Open-interval (0, 1] uniforms for one draw slot of each pair.

    Draw k of pair p is mix64(key_p + (k+1) * GOLDEN) with
    key_p = mix64(seed + (p+1) * GOLDEN): per-pair SplitMix64 streams
    whose states are hashes of (seed, pair_id).
    """
    with np.errstate(over="ignore"):  # uint64 wraparound is intentional
        s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        keys = _mix64(s + (pair_ids.astype(np.uint64) + np.uint64(1)) * _GOLDEN)
        bits = _mix64(keys + np.uint64(slot + 1) * _GOLDEN)
    return ((bits >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def _standard_normal_pair(
    seed: int, pair_ids: np.ndarray, slot_u1: int, slot_u2: int
) -> tuple[np.ndarray, np.ndarray]:
    # Box-Muller; u1 in (0, 1] keeps the log finite.
    u1 = _uniforms(seed, pair_ids, slot_u1)
    u2 = _uniforms(seed, pair_ids, slot_u2)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    return r * np.cos(theta), r * np.sin(theta)


def _formation_offsets(d: DetectorModel, seed: int, pair_ids: np.ndarray) -> np.ndarray:
    if d.formation_profile == "delta" or d.formation_width == 0.0:
        return np.zeros(pair_ids.size)
    if d.formation_profile == "gaussian":
        z, _ = _standard_normal_pair(seed, pair_ids, _SLOT_OFFSET_U1, _SLOT_OFFSET_U2)
        return d.formation_width * z
    # uniform, full width centered on 0
    u = _uniforms(seed, pair_ids, _SLOT_OFFSET_U1)
    return d.formation_width * (u - 0.5)


def _fill_chunk(out: dict, p: RateParameters, d: DetectorModel, seed: int, lo: int, hi: int):
    ids = np.arange(lo, hi, dtype=np.int64)
    t_f = -np.log(_uniforms(seed, ids, _SLOT_T_F)) / p.gamma_f
    dt = -np.log(_uniforms(seed, ids, _SLOT_DT)) / p.gamma_s
    t_s = t_f + dt
    emitter = (_uniforms(seed, ids, _SLOT_COIN) > 0.5).astype(np.uint8)
    det_f = _uniforms(seed, ids, _SLOT_DET_F) <= d.efficiency
    det_s = _uniforms(seed, ids, _SLOT_DET_S) <= d.efficiency

    offset = _formation_offsets(d, seed, ids)
    if d.jitter_sigma > 0.0:
        z_f, z_s = _standard_normal_pair(seed, ids, _SLOT_JITTER_U1, _SLOT_JITTER_U2)
        t_f_obs = t_f + offset + d.jitter_sigma * z_f
        t_s_obs = t_s + offset + d.jitter_sigma * z_s
    else:
        t_f_obs = t_f + offset
        t_s_obs = t_s + offset

    sl = slice(lo, hi)
    out["pair_id"][sl] = ids
    out["t_f"][sl] = t_f
    out["t_s"][sl] = t_s
    out["first_emitter"][sl] = emitter
    out["detected_f"][sl] = det_f
    out["detected_s"][sl] = det_s
    out["t_f_obs"][sl] = t_f_obs
    out["t_s_obs"][sl] = t_s_obs


def simulate(
    p: RateParameters,
    n_pairs: int,
    seed: int,
    detector: DetectorModel = DetectorModel(),
    n_threads: int = 1,
    chunk_size: int = 262_144,
) -> EventSet:
    """Generate decay histories for n_pairs entangled pairs.

    Parameters
    ----------
    p : RateParameters
        Model rates.  p.n0 is ignored here; the integer n_pairs is the
        sample size.
    n_pairs : int
        Number of pairs to simulate (>= 1).
    seed : int
        64-bit stream seed.  The same (p, detector, seed, n_pairs) always
        reproduces the same events, for any n_threads or chunk_size.
    detector : DetectorModel
        Detection efficiency and time smearing; defaults to ideal.
    n_threads : int
        Worker threads for chunked generation.  Output is ordered by
        pair_id regardless.
    """
    if n_pairs < 1:
        raise ParameterError(f"n_pairs must be >= 1, got {n_pairs}")
    if int(n_pairs) > 2**53:
        raise ParameterError("n_pairs exceeds the supported index range")
    if n_threads < 1:
        raise ParameterError(f"n_threads must be >= 1, got {n_threads}")
    if chunk_size < 1:
        raise ParameterError(f"chunk_size must be >= 1, got {chunk_size}")

    n = int(n_pairs)
    out = {
        "pair_id": np.empty(n, dtype=np.int64),
        "t_f": np.empty(n),
        "t_s": np.empty(n),
        "first_emitter": np.empty(n, dtype=np.uint8),
        "detected_f": np.empty(n, dtype=bool),
        "detected_s": np.empty(n, dtype=bool),
        "t_f_obs": np.empty(n),
        "t_s_obs": np.empty(n),
    }
    bounds = [(lo, min(lo + chunk_size, n)) for lo in range(0, n, chunk_size)]
    if n_threads == 1 or len(bounds) == 1:
        for lo, hi in bounds:
            _fill_chunk(out, p, detector, seed, lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            futures = [
                pool.submit(_fill_chunk, out, p, detector, seed, lo, hi)
                for lo, hi in bounds
            ]
            for fut in futures:
                fut.result()

    return EventSet(params=p, detector=detector, seed=int(seed), **out)


def empirical_populations(ev: EventSet, grid) -> list[PopulationState]:
    """Count populations of atom type A on a time grid, from true times.

    n_e(t) counts pairs still entangled (t_f > t); n_i(t) counts pairs
    whose surviving unstable atom is an A (first emitter was B) with
    t_f <= t < t_s; the ground count follows from conservation with
    n0 = n_pairs (each pair holds exactly one A atom).
    """
    tt = np.asarray(grid, dtype=float)
    if tt.ndim != 1 or tt.size == 0:
        raise ParameterError("grid must be a nonempty 1-D sequence of times")
    if np.any(~np.isfinite(tt)) or np.any(tt < 0.0):
        raise ParameterError("grid times must be finite and >= 0")
    if np.any(np.diff(tt) < 0.0):
        raise ParameterError("grid must be sorted ascending")

    n = len(ev)
    t_f_sorted = np.sort(ev.t_f)
    survivor_a = ev.first_emitter == 1  # B emitted first, A survives
    t_f_a = np.sort(ev.t_f[survivor_a])
    t_s_a = np.sort(ev.t_s[survivor_a])

    n_e = n - np.searchsorted(t_f_sorted, tt, side="right")
    n_i = np.searchsorted(t_f_a, tt, side="right") - np.searchsorted(
        t_s_a, tt, side="right"
    )
    return [
        PopulationState(
            t=float(t), n_e=float(e), n_i=float(i), n_i_g=float(n - e - i)
        )
        for t, e, i in zip(tt, n_e, n_i)
    ]


def coincidence_histogram(
    ev: EventSet, bin_width: float, t_max: float, use_observed: bool = False
) -> Histogram:
    """Histogram of photon time separations |t_s - t_f| on [0, t_max).

    Covers a whole number of uniform bins (floor(t_max / bin_width));
    separations at or beyond the last edge are counted as overflow.  With
    use_observed, only pairs with both photons detected enter, and the
    observed (smeared) separations are binned.
    """
    if not (math.isfinite(bin_width) and bin_width > 0.0):
        raise ParameterError(f"bin_width must be > 0, got {bin_width}")
    if not (math.isfinite(t_max) and t_max > bin_width):
        raise ParameterError(f"t_max must exceed bin_width, got {t_max}")

    if use_observed:
        keep = ev.detected_f & ev.detected_s
        seps = np.abs(ev.t_s_obs[keep] - ev.t_f_obs[keep])
    else:
        seps = ev.t_s - ev.t_f

    n_bins = int(math.floor(t_max / bin_width))
    edges = bin_width * np.arange(n_bins + 1, dtype=float)
    in_range = seps < edges[-1]  # np.histogram would close the last edge
    counts, _ = np.histogram(seps[in_range], bins=edges)
    return Histogram(
        bin_edges=edges,
        counts=counts.astype(np.int64),
        overflow=int(seps.size - np.count_nonzero(in_range)),
        total=int(seps.size),
    )

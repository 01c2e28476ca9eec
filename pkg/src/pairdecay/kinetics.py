"""Closed-form kinetics of the two-stage decay of entangled atom pairs.

An entangled pair emits a first photon at rate ``gamma_f`` (which is also
the disentanglement rate); the surviving unstable atom of the resulting
product state emits the second photon at rate ``gamma_s``.  With
time-independent rates the populations are

    n_e(t)   = n0 * exp(-gamma_f * t)
    n_i(t)   = n0 * gamma_f * (exp(-gamma_f t) - exp(-gamma_s t)) / (2 (gamma_s - gamma_f))
    n_i_g(t) = n0 - n_e(t) - n_i(t)

where ``n_i`` counts unstable product-state atoms of ONE type (A or B) and
``n_i_g`` ground-state atoms of that type.  Cumulative photon counts:

    N_f(t) = n0 * (1 - exp(-gamma_f t))        first photons
    N_s(t) = N_f(t) - 2 * n_i(t)               second photons

All rates are conventionally expressed in units of the free-atom rate
``gamma_0`` so that the free-atom lifetime tau_0 = 1/gamma_0 = 1.

The difference of exponentials is evaluated through ``expm1`` so there is
no catastrophic cancellation for gamma_s close to gamma_f; exactly at the
degenerate point the analytic limit n0 * g * t * exp(-g t) / 2 with
g = (gamma_f + gamma_s)/2 takes over (threshold ``EPS_DEGENERATE``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError, ParameterError

# Relative half-width of the band around gamma_s == gamma_f inside which the
# degenerate limit formula is used instead of the generic closed form.
EPS_DEGENERATE = 1e-9

# Negative floating residue up to this fraction of n0 is clamped to zero.
CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class RateParameters:
    """Rate constants and initial pair count of the two-stage decay model.

    Parameters
    ----------
    gamma_f : float
        Emission rate of the first photon by the entangled pair; equal to
        the disentanglement rate.
    gamma_s : float
        Emission rate of the second photon (decay of the product-state
        unstable atom).  Atoms A and B are identical, so one value serves
        both.
    n0 : float
        Initial number of entangled pairs (real-valued in the analytic
        layer).
    gamma_0 : float
        Spontaneous rate of a free atom, the reference scale
        (tau_0 = 1/gamma_0).  Not enforced as a bound on gamma_f; it is
        carried so the bound gamma_f >= gamma_0 is checkable.
    """

    gamma_f: float
    gamma_s: float
    n0: float = 1.0
    gamma_0: float = 1.0

    def __post_init__(self):
        for name in ("gamma_f", "gamma_s", "gamma_0"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise ParameterError(f"{name} must be finite and > 0, got {value}")
        if not math.isfinite(self.n0) or self.n0 < 0.0:
            raise ParameterError(f"n0 must be finite and >= 0, got {self.n0}")

    @property
    def tau_0(self) -> float:
        return 1.0 / self.gamma_0

    @property
    def is_degenerate(self) -> bool:
        """True when |gamma_s - gamma_f| falls inside the degenerate band."""
        return abs(self.gamma_s - self.gamma_f) <= EPS_DEGENERATE * max(
            self.gamma_s, self.gamma_f
        )

    def satisfies_rate_bound(self) -> bool:
        """Whether gamma_f >= gamma_0 (disentanglement at least as fast as
        the mean of the individual rates)."""
        return self.gamma_f >= self.gamma_0


@dataclass(frozen=True)
class PopulationState:
    """Populations of one atom type at time t.

    n_e entangled pairs, n_i unstable product-state atoms of the type,
    n_i_g ground-state atoms of the type; n_e + n_i + n_i_g = n0.
    """

    t: float
    n_e: float
    n_i: float
    n_i_g: float


@dataclass(frozen=True)
class PhotonDistributions:
    """Cumulative photon counts by time t: N_f first and N_s second photons."""

    t: float
    N_f: float
    N_s: float


def _check_time(t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0):
        raise ParameterError(f"time must be finite and >= 0, got {t!r}")
    return arr


def _as_input_shape(values: np.ndarray, t) -> "float | np.ndarray":
    if np.ndim(t) == 0:
        return float(values)
    return values


def _exp_diff_over_gap(p: RateParameters, t: np.ndarray) -> np.ndarray:
    """(exp(-gamma_f t) - exp(-gamma_s t)) / (gamma_s - gamma_f), stably.

    Factoring out the slower exponential leaves expm1 with a nonpositive
    argument, so the subtraction never cancels and nothing overflows; in
    the degenerate band the limit t * exp(-g t) with g the midpoint rate
    takes over (accurate to ~EPS_DEGENERATE/2 across the band).
    """
    if p.is_degenerate:
        g = 0.5 * (p.gamma_f + p.gamma_s)
        return t * np.exp(-g * t)
    lo = min(p.gamma_f, p.gamma_s)
    gap = abs(p.gamma_s - p.gamma_f)
    return np.exp(-lo * t) * (-np.expm1(-gap * t)) / gap


def entangled_population(p: RateParameters, t) -> "float | np.ndarray":
    """Number of surviving entangled pairs, n0 * exp(-gamma_f * t)."""
    tt = _check_time(t)
    return _as_input_shape(p.n0 * np.exp(-p.gamma_f * tt), t)


def product_unstable_population(p: RateParameters, t) -> "float | np.ndarray":
    """Unstable product-state atoms of one type at time t.

    Generic closed form n0 * gamma_f * (e^{-gamma_f t} - e^{-gamma_s t})
    / (2 (gamma_s - gamma_f)); the degenerate limit
    n0 * g * t * e^{-g t} / 2 applies inside the EPS_DEGENERATE band.
    """
    tt = _check_time(t)
    return _as_input_shape(0.5 * p.n0 * p.gamma_f * _exp_diff_over_gap(p, tt), t)


def ground_population(p: RateParameters, t) -> "float | np.ndarray":
    """Ground-state atoms of one type: n0 - n_e(t) - n_i(t).

    Floating residue in [-CLAMP_TOL * n0, 0) is clamped to zero; anything
    more negative indicates an internal inconsistency and raises.
    """
    tt = _check_time(t)
    value = np.asarray(
        p.n0 - p.n0 * np.exp(-p.gamma_f * tt) - 0.5 * p.n0 * p.gamma_f * _exp_diff_over_gap(p, tt)
    )
    if np.any(value < -CLAMP_TOL * p.n0):
        raise IntegrationError(
            f"ground population fell below -{CLAMP_TOL} * n0; closed forms inconsistent"
        )
    return _as_input_shape(np.where(value < 0.0, 0.0, value), t)


def first_photon_distribution(p: RateParameters, t) -> "float | np.ndarray":
    """Cumulative count of first photons, N_f(t) = n0 * (1 - exp(-gamma_f t))."""
    tt = _check_time(t)
    return _as_input_shape(p.n0 * (-np.expm1(-p.gamma_f * tt)), t)


def second_photon_distribution(p: RateParameters, t) -> "float | np.ndarray":
    """Cumulative count of second photons, N_s(t) = N_f(t) - 2 * n_i(t).

    The subtraction can round a hair below zero for t -> 0 (both terms are
    ~gamma_f t n0 there); negative round-off is clamped to zero.
    """
    tt = _check_time(t)
    n_f = p.n0 * (-np.expm1(-p.gamma_f * tt))
    value = np.asarray(n_f - p.n0 * p.gamma_f * _exp_diff_over_gap(p, tt))
    return _as_input_shape(np.where(value < 0.0, 0.0, value), t)


def photon_distributions(p: RateParameters, t: float) -> PhotonDistributions:
    return PhotonDistributions(
        t=float(t),
        N_f=first_photon_distribution(p, t),
        N_s=second_photon_distribution(p, t),
    )


def population_state(p: RateParameters, t: float) -> PopulationState:
    """Closed-form populations at a single time."""
    return PopulationState(
        t=float(t),
        n_e=entangled_population(p, t),
        n_i=product_unstable_population(p, t),
        n_i_g=ground_population(p, t),
    )


def coincidence_density(p: RateParameters, dt) -> "float | np.ndarray":
    """Density of photon-pair separations, gamma_s * n0 * exp(-gamma_s |dt|).

    Normalized so its integral over [0, inf) equals n0: one coincidence
    per pair.  Callers pass the absolute separation; negative dt is
    rejected.
    """
    sep = np.asarray(dt, dtype=float)
    if np.any(~np.isfinite(sep)) or np.any(sep < 0.0):
        raise ParameterError(f"separation must be finite and >= 0, got {dt!r}")
    return _as_input_shape(p.gamma_s * p.n0 * np.exp(-p.gamma_s * sep), dt)


def ode_oracle(p: RateParameters, t_end: float, steps: int) -> list[PopulationState]:
    """Integrate the rate equations with fixed-step classical RK4.

    Serves as an independent check on the closed forms.  The system is

        dn_e/dt   = -gamma_f * n_e
        dn_i/dt   = (gamma_f / 2) * n_e - gamma_s * n_i
        dn_i_g/dt = gamma_s * n_i + (gamma_f / 2) * n_e

    for one atom type.  The third component is integrated only to monitor
    conservation drift (RK4 preserves the linear invariant up to
    round-off); the returned ground-state count is defined by
    conservation, n_i_g = n0 - n_e - n_i.

    Returns states at the steps + 1 uniform grid points covering
    [0, t_end].  Raises IntegrationError if the drift of the integrated
    sum away from n0 exceeds 1e-8 * n0.
    """
    if not (math.isfinite(t_end) and t_end > 0.0):
        raise ParameterError(f"t_end must be finite and > 0, got {t_end}")
    if steps < 10:
        raise ParameterError(f"steps must be >= 10, got {steps}")

    gf, gs, n0 = p.gamma_f, p.gamma_s, p.n0
    h = t_end / steps
    ne, ni, ng = n0, 0.0, 0.0
    out = [PopulationState(t=0.0, n_e=ne, n_i=ni, n_i_g=n0 - ne - ni)]

    def rhs(e, i):
        return -gf * e, 0.5 * gf * e - gs * i, gs * i + 0.5 * gf * e

    drift_tol = 1e-8 * n0 if n0 > 0.0 else 1e-8
    for k in range(steps):
        k1e, k1i, k1g = rhs(ne, ni)
        k2e, k2i, k2g = rhs(ne + 0.5 * h * k1e, ni + 0.5 * h * k1i)
        k3e, k3i, k3g = rhs(ne + 0.5 * h * k2e, ni + 0.5 * h * k2i)
        k4e, k4i, k4g = rhs(ne + h * k3e, ni + h * k3i)
        ne += h * (k1e + 2.0 * (k2e + k3e) + k4e) / 6.0
        ni += h * (k1i + 2.0 * (k2i + k3i) + k4i) / 6.0
        ng += h * (k1g + 2.0 * (k2g + k3g) + k4g) / 6.0
        if abs(ne + ni + ng - n0) > drift_tol:
            raise IntegrationError(
                f"conservation drift exceeded 1e-8 * n0 at step {k + 1}; "
                f"step size {h} is unstable for these rates"
            )
        out.append(PopulationState(t=(k + 1) * h, n_e=ne, n_i=ni, n_i_g=n0 - ne - ni))
    return out


def population_curve(p: RateParameters, grid) -> np.ndarray:
    """Closed-form curves sampled on a time grid.

    Returns a (len(grid), 6) array with columns t, n_e, n_i, n_i_g, N_f,
    N_s, ready for CSV serialization.
    """
    tt = _check_time(np.asarray(grid, dtype=float))
    if tt.ndim != 1:
        raise ParameterError("grid must be one-dimensional")
    n_e = p.n0 * np.exp(-p.gamma_f * tt)
    n_i = 0.5 * p.n0 * p.gamma_f * _exp_diff_over_gap(p, tt)
    n_ig = np.asarray(ground_population(p, tt))
    n_f = p.n0 * (-np.expm1(-p.gamma_f * tt))
    n_s = np.asarray(second_photon_distribution(p, tt))
    return np.column_stack([tt, n_e, n_i, n_ig, n_f, n_s])

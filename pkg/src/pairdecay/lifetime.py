"""Solver for the transcendental single-atom lifetime equation.

The lifetime tau of an atom that starts in an entangled pair is defined
by the total unstable population of its type falling to n0/e:

    n_e(tau) + n_i(tau) = n0 / e

which, divided through by 2 n0 (gamma_s - gamma_f), is the normalized
transcendental equation

    (2 gamma_s - gamma_f) exp(-gamma_f tau) - gamma_f exp(-gamma_s tau)
        = 2 (gamma_s - gamma_f) / e.

The solver works on the branch-free residual
f(tau) = [n_e(tau) + n_i(tau)] / n0 - 1/e, which has no singularity at
gamma_s == gamma_f: in the degenerate limit it reduces (L'Hopital) to
exp(-u) (1 + u/2) - 1/e with u = g tau.  f decreases strictly from
1 - 1/e at tau = 0 to -1/e, so a bracketed bisection/secant hybrid finds
the unique positive root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ParameterError, SolverError
from .kinetics import RateParameters, entangled_population, product_unstable_population

INV_E = math.exp(-1.0)

# Convergence: |residual| below RESIDUAL_TOL, or bracket width below
# BRACKET_TOL * tau_0, whichever happens first.
RESIDUAL_TOL = 1e-12
BRACKET_TOL = 1e-12
MAX_ITERATIONS = 200


@dataclass(frozen=True)
class LifetimeSolution:
    """Root of the lifetime equation with solver diagnostics.

    tau is in the same (inverse-rate) units as the input; divide by tau_0
    for reporting.  branch records whether the degenerate (L'Hopital)
    form of the populations was in effect.
    """

    tau: float
    residual: float
    branch: str  # "generic" | "degenerate"
    iterations: int
    bracket: tuple[float, float]


def lifetime_residual(p: RateParameters, tau: float) -> float:
    """Branch-free residual f(tau) = [n_e(tau) + n_i(tau)]/n0 - 1/e.

    Equals the normalized lifetime equation for any gamma_s, gamma_f;
    f(0) = 1 - 1/e > 0 and f -> -1/e as tau -> inf.
    """
    if not (math.isfinite(tau) and tau >= 0.0):
        raise ParameterError(f"tau must be finite and >= 0, got {tau}")
    unit = replace(p, n0=1.0)
    return (
        entangled_population(unit, tau)
        + product_unstable_population(unit, tau)
        - INV_E
    )


def equation_residual(p: RateParameters, tau: float) -> float:
    """Literal (unnormalized) form of the lifetime equation.

    (2 gamma_s - gamma_f) e^{-gamma_f tau} - gamma_f e^{-gamma_s tau}
    - 2 (gamma_s - gamma_f)/e.  Undefined usefulness in the degenerate
    band (both sides vanish); retained as a cross-check of the
    branch-free residual away from it.
    """
    if not (math.isfinite(tau) and tau >= 0.0):
        raise ParameterError(f"tau must be finite and >= 0, got {tau}")
    gf, gs = p.gamma_f, p.gamma_s
    return (2.0 * gs - gf) * math.exp(-gf * tau) - gf * math.exp(-gs * tau) - 2.0 * (
        gs - gf
    ) * INV_E


def solve_lifetime(p: RateParameters) -> LifetimeSolution:
    """Find the unique positive root of the lifetime residual.

    A bracketed secant/bisection hybrid on [0, 50/min(gamma_f, gamma_s)]:
    the secant step is taken whenever it lands strictly inside the current
    bracket, otherwise the bracket is bisected, so convergence is
    guaranteed.  Terminates when |f| <= 1e-12 or the bracket is narrower
    than 1e-12 * tau_0.
    """
    lo, hi = 0.0, 50.0 / min(p.gamma_f, p.gamma_s)
    f_lo = lifetime_residual(p, lo)
    f_hi = lifetime_residual(p, hi)
    if not (f_lo > 0.0 > f_hi):
        raise SolverError(
            f"no sign change on [0, {hi}]: f(0)={f_lo}, f(T)={f_hi}; "
            "cannot happen for valid parameters"
        )

    branch = "degenerate" if p.is_degenerate else "generic"
    width_tol = BRACKET_TOL * p.tau_0
    for iterations in range(1, MAX_ITERATIONS + 1):
        # Secant through the bracket endpoints; fall back to bisection
        # when the step degenerates or leaves the bracket.
        denom = f_hi - f_lo
        if denom != 0.0:
            cand = lo - f_lo * (hi - lo) / denom
        else:
            cand = 0.5 * (lo + hi)
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)

        tau, f_tau = cand, lifetime_residual(p, cand)
        if abs(f_tau) <= RESIDUAL_TOL:
            break
        if f_tau > 0.0:
            lo, f_lo = tau, f_tau
        else:
            hi, f_hi = tau, f_tau
        if hi - lo <= width_tol:
            tau, f_tau = 0.5 * (lo + hi), lifetime_residual(p, 0.5 * (lo + hi))
            break
    else:
        raise SolverError(f"no convergence after {MAX_ITERATIONS} iterations")

    return LifetimeSolution(
        tau=tau,
        residual=f_tau,
        branch=branch,
        iterations=iterations,
        bracket=(lo, hi),
    )


def lifetime_sweep(
    gamma_s: float, gamma_f_grid, gamma_0: float = 1.0
) -> list[tuple[float, float]]:
    """Solve the lifetime equation along a grid of first-photon rates.

    Returns (gamma_f, tau) pairs at fixed gamma_s, in grid order.  Used to
    check that tau decreases in gamma_f, so its maximum over the allowed
    region sits at the gamma_f = gamma_0 edge.
    """
    grid = list(gamma_f_grid)
    if not grid:
        raise ParameterError("gamma_f grid must be nonempty")
    out = []
    for gf in grid:
        p = RateParameters(gamma_f=float(gf), gamma_s=gamma_s, n0=1.0, gamma_0=gamma_0)
        out.append((float(gf), solve_lifetime(p).tau))
    return out

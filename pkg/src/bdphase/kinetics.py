"""Truncated cluster kinetics: rates, fluxes, right-hand side, time stepping.

Cluster states are plain numpy arrays whose last axis enumerates cluster
sizes alpha = 1..n (index 0 holds the monomer density z_1).  Leading axes,
if present, are spatial cell axes; every operation here broadcasts over
them, so the same functions serve a single state vector and a whole grid
of states.  All functions are pure: they never mutate their inputs, which
makes per-cell evaluation trivially safe to parallelize.

The finite system closes by zeroing the condensation channel of the
largest tracked size, so the flux vector ``j`` always satisfies
``j[n] = 0`` and ``j[0] = -sum(j[1:])``; the size-weighted density
``rho = sum(alpha * z_alpha)`` is then a conserved quantity of the exact
dynamics, and the integrator preserves it to round-off per step.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DegenerateStateError, DomainError, RateOverflowError, StepFailureError

# Exponent cap (natural-log scale) applied before any exp() so rate
# evaluation stays inside double-precision range.
EXP_CAP = 700.0

# Positivity is enforced by step rejection with dt halving, never by
# clipping; this is the retry budget before a step is declared failed.
MAX_STEP_HALVINGS = 48


@dataclass(frozen=True)
class RateModel:
    """Constitutive data for the cluster reaction rates.

    Attributes
    ----------
    e1, e2 : ndarray
        Enthalpic energy of an alpha-cluster in phase 1 / phase 2, one
        entry per tracked size alpha = 1..n.  Must be positive.
    e_act : callable
        Activation energy as a function of the phase indicator; must
        accept scalars and arrays and broadcast elementwise.
    b1, b2 : float
        Accessible-lattice-site fractions of the two phases, in (0, 1].
    kb_theta : float
        Thermal energy scale (Boltzmann constant times temperature).
    fixed_k : float or ndarray or None
        Prescribed condensation prefactor K.  ``None`` selects the
        self-consistent mode in which K is recomputed from the monomer
        constraint at every right-hand-side evaluation; only that mode
        guarantees monotone free-energy decay.
    """

    e1: np.ndarray
    e2: np.ndarray
    e_act: Callable
    b1: float
    b2: float
    kb_theta: float
    fixed_k: float | np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.e1.shape[-1]

    @property
    def k_mode(self) -> str:
        return "fixed" if self.fixed_k is not None else "self_consistent"

    @property
    def b_min(self) -> float:
        return min(self.b1, self.b2)

    def with_fixed_k(self, k) -> "RateModel":
        return replace(self, fixed_k=k)

    def validate(self) -> None:
        e1 = np.asarray(self.e1, dtype=float)
        e2 = np.asarray(self.e2, dtype=float)
        if e1.ndim != 1 or e2.shape != e1.shape:
            raise DomainError("enthalpy tables e1, e2 must be 1-d and equally long")
        if not (np.all(e1 > 0.0) and np.all(e2 > 0.0)):
            raise DomainError("enthalpic energies must be strictly positive")
        for name, b in (("b1", self.b1), ("b2", self.b2)):
            if not 0.0 < b <= 1.0:
                raise DomainError(f"{name} must lie in (0, 1], got {b}")
        if not self.kb_theta > 0.0:
            raise DomainError("kb_theta must be positive")
        for chi in (0.0, 0.5, 1.0):
            ea = float(np.asarray(self.e_act(chi)))
            if not np.isfinite(ea):
                raise DomainError(f"activation energy is not finite at chi={chi}")
        if self.fixed_k is not None:
            k = np.asarray(self.fixed_k, dtype=float)
            if not (np.all(np.isfinite(k)) and np.all(k > 0.0)):
                raise DomainError("fixed K must be positive and bounded")


def _check_chi(chi) -> np.ndarray:
    chi = np.asarray(chi, dtype=float)
    if np.any(chi < 0.0) or np.any(chi > 1.0):
        raise DomainError("phase indicator chi must lie in [0, 1]")
    return chi


def b_mix(chi, rm: RateModel):
    """Phase-interpolated lattice factor b_chi = chi*b1 + (1-chi)*b2.

    Written as ``b2 + chi*(b1 - b2)`` so equal lattice factors give a
    bitwise chi-independent result; the value is floored at min(b1, b2)
    against last-ulp rounding so downstream exponents 1/b_chi stay safe.
    """
    chi = _check_chi(chi)
    lo, hi = min(rm.b1, rm.b2), max(rm.b1, rm.b2)
    out = np.clip(rm.b2 + chi * (rm.b1 - rm.b2), lo, hi)
    return float(out) if out.ndim == 0 else out


def _mixed_enthalpy(chi: np.ndarray, rm: RateModel) -> np.ndarray:
    """chi*E1 + (1-chi)*E2 per size, shape (..., n); exact when E1 == E2."""
    return rm.e2 + chi[..., None] * (rm.e1 - rm.e2)


def _capped_exp(exponent: np.ndarray) -> np.ndarray:
    hi = np.max(exponent) if exponent.size else 0.0
    if hi > EXP_CAP:
        flat = np.argmax(exponent)
        alpha = 1 + int(np.unravel_index(flat, exponent.shape)[-1])
        raise RateOverflowError(alpha, hi, EXP_CAP)
    return np.exp(exponent)


def arrhenius_rate(alpha: int, chi, rm: RateModel):
    """Reaction rate R_alpha(chi) from the Arrhenius law.

    ``exp((chi*E1_a + (1-chi)*E2_a - E_A(chi)) / kb_theta)`` with an
    exponent cap of EXP_CAP; exceeding it raises RateOverflowError
    naming the offending size.
    """
    if not 1 <= alpha <= rm.n:
        raise DomainError(f"cluster size alpha={alpha} outside 1..{rm.n}")
    chi = _check_chi(chi)
    i = alpha - 1
    mixed = rm.e2[i] + chi * (rm.e1[i] - rm.e2[i])
    exponent = np.asarray((mixed - rm.e_act(chi)) / rm.kb_theta)
    hi = float(np.max(exponent))
    if hi > EXP_CAP:
        raise RateOverflowError(alpha, hi, EXP_CAP)
    out = np.exp(exponent)
    return float(out) if out.ndim == 0 else out


def evaporation_coeff(chi, rm: RateModel) -> np.ndarray:
    """Evaporation coefficients R_alpha(chi)^(1/b_chi) for alpha = 1..n.

    The condensation coefficient is K times this array.  Shape (..., n)
    with chi broadcast over leading cell axes.
    """
    chi = _check_chi(chi)
    b = np.asarray(b_mix(chi, rm))
    expo = (_mixed_enthalpy(chi, rm) - np.asarray(rm.e_act(chi))[..., None]) / rm.kb_theta
    return _capped_exp(expo / b[..., None])


def self_consistent_k(z: np.ndarray, chi, rm: RateModel):
    """Condensation prefactor K from the monomer constraint.

    Solves ``(1/K) * z1 * R1^(1/b_chi) / N(z) = exp(-E_A(chi)/(b_chi*kb_theta))``
    for K, which reduces to ``(z1/N) * exp((chi*E1_1+(1-chi)*E2_1)/(b_chi*kb_theta))``;
    the activation energy cancels.  This is the choice that makes the
    free energy dissipate exactly along the cluster dynamics.

    Raises DegenerateStateError if the total count or the monomer
    density vanishes anywhere.
    """
    z = np.asarray(z, dtype=float)
    chi = _check_chi(chi)
    n_tot = count_n(z)
    z1 = z[..., 0]
    if np.any(n_tot == 0.0):
        raise DegenerateStateError("self-consistent K undefined: N(z) = 0")
    if np.any(z1 == 0.0):
        raise DegenerateStateError("self-consistent K undefined: monomer density z_1 = 0")
    b = np.asarray(b_mix(chi, rm))
    mixed1 = rm.e2[0] + chi * (rm.e1[0] - rm.e2[0])
    out = (z1 / n_tot) * _capped_exp(np.asarray(mixed1 / (b * rm.kb_theta)))
    return float(out) if np.ndim(out) == 0 else out


def effective_k(z: np.ndarray, chi, rm: RateModel):
    """K actually used by the dynamics: fixed_k, or the self-consistent value."""
    if rm.fixed_k is not None:
        return rm.fixed_k
    return self_consistent_k(z, chi, rm)


def fluxes(z: np.ndarray, chi, k, rm: RateModel) -> np.ndarray:
    """Net cluster-growth fluxes, shape (..., n+1).

    ``j[..., a] = K*R_a^(1/b)*z_a - R_{a+1}^(1/b)*z_{a+1}`` for
    1 <= a <= n-1, ``j[..., n] = 0`` (truncation closure) and
    ``j[..., 0] = -sum(j[..., 1:])`` so the size-weighted density is
    conserved.
    """
    z = np.asarray(z, dtype=float)
    ge = evaporation_coeff(chi, rm)
    k = np.asarray(k, dtype=float)
    cond = k[..., None] * ge * z
    evap = ge * z
    j = np.zeros(z.shape[:-1] + (z.shape[-1] + 1,), dtype=float)
    j[..., 1:-1] = cond[..., :-1] - evap[..., 1:]
    j[..., 0] = -np.sum(j[..., 1:], axis=-1)
    return j


def rhs(z: np.ndarray, chi, rm: RateModel) -> np.ndarray:
    """Time derivative of the truncated cluster system.

    ``dz_a = j_{a-1} - j_a`` for every tracked size; with the closure
    and monomer bookkeeping built into ``fluxes`` this reproduces the
    truncated evolution equations, and ``sum(alpha * dz_alpha) = 0`` in
    exact arithmetic.
    """
    return _rhs_factory(chi, rm)(np.asarray(z, dtype=float))


def _rhs_factory(chi, rm: RateModel):
    """Right-hand-side closure with rate tables precomputed for fixed chi."""
    chi = _check_chi(chi)
    ge = evaporation_coeff(chi, rm)
    if rm.fixed_k is not None:
        k_fixed = np.asarray(rm.fixed_k, dtype=float)
        k_of = None
    else:
        b = np.asarray(b_mix(chi, rm))
        mixed1 = rm.e2[0] + chi * (rm.e1[0] - rm.e2[0])
        k_pref = _capped_exp(np.asarray(mixed1 / (b * rm.kb_theta)))

        def k_of(z):
            n_tot = np.sum(z, axis=-1)
            z1 = z[..., 0]
            dead = n_tot == 0.0
            if np.any(dead) and np.any(np.any(z != 0.0, axis=-1) & dead):
                raise DegenerateStateError("self-consistent K undefined: N(z) = 0")
            if np.any((z1 == 0.0) & ~dead):
                raise DegenerateStateError(
                    "self-consistent K undefined: monomer density z_1 = 0")
            safe_n = np.where(dead, 1.0, n_tot)
            return np.where(dead, 0.0, (z1 / safe_n) * k_pref)

    def f(z):
        k = k_fixed if k_of is None else k_of(z)
        evap = ge * z
        cond = np.asarray(k)[..., None] * evap
        j = np.zeros(z.shape[:-1] + (z.shape[-1] + 1,), dtype=float)
        j[..., 1:-1] = cond[..., :-1] - evap[..., 1:]
        j[..., 0] = -np.sum(j[..., 1:], axis=-1)
        return j[..., :-1] - j[..., 1:]

    return f


def rho(z: np.ndarray):
    """Size-weighted density rho(z) = sum(alpha * z_alpha); conserved."""
    z = np.asarray(z, dtype=float)
    alphas = np.arange(1, z.shape[-1] + 1, dtype=float)
    return z @ alphas


def count_n(z: np.ndarray):
    """Total cluster count N(z) = sum(z_alpha)."""
    return np.sum(np.asarray(z, dtype=float), axis=-1)


def x_norm(z: np.ndarray):
    """Size-weighted absolute norm sum(alpha * |z_alpha|); equals rho for z >= 0."""
    z = np.asarray(z, dtype=float)
    alphas = np.arange(1, z.shape[-1] + 1, dtype=float)
    return np.abs(z) @ alphas


@dataclass(frozen=True)
class StepReport:
    """Bookkeeping for one accepted kinetics step."""

    dt: float
    mass_drift: float
    min_component: float
    halvings: int
    error_ratio: float


def attempt_step(z: np.ndarray, chi, rm: RateModel, dt: float,
                 rtol: float = 1e-8, atol: float = 1e-12):
    """One classical Runge-Kutta-4 trial step with step-doubling control.

    Returns ``(z_new, ok, err_ratio)`` where ``z_new`` is the two-half-step
    result, ``err_ratio`` the estimated local error over tolerance, and
    ``ok`` requires both ``err_ratio <= 1`` and componentwise positivity.
    No retries happen here; callers own the dt-halving policy.
    """
    z = np.asarray(z, dtype=float)
    f = _rhs_factory(chi, rm)

    def rk4(y, h):
        k1 = f(y)
        k2 = f(y + (0.5 * h) * k1)
        k3 = f(y + (0.5 * h) * k2)
        k4 = f(y + h * k3)
        return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    try:
        with np.errstate(over="ignore", invalid="ignore"):
            y_full = rk4(z, dt)
            y_half = rk4(z, 0.5 * dt)
            y_new = rk4(y_half, 0.5 * dt)
    except DegenerateStateError:
        return z, False, np.inf

    scale = atol + rtol * np.maximum(np.abs(z), np.abs(y_new))
    with np.errstate(invalid="ignore"):
        err = np.max(np.abs(y_new - y_full) / (15.0 * scale))
    if not np.isfinite(err):
        return z, False, np.inf
    ok = err <= 1.0 and float(np.min(y_new)) >= 0.0 and float(np.min(y_half)) >= 0.0
    return y_new, ok, float(err)


def step_cell(z: np.ndarray, chi, rm: RateModel, dt: float,
              rtol: float = 1e-8, atol: float = 1e-12,
              max_halvings: int = MAX_STEP_HALVINGS):
    """Take one accepted step, halving dt on error or positivity loss.

    The accepted step may be smaller than the requested dt; the report
    records it.  Positivity is enforced by rejection and retry, never by
    clipping (clipping would break mass conservation).  Raises
    StepFailureError naming the offending size once the retry budget is
    exhausted.

    Returns ``(z_new, StepReport)``.
    """
    if not dt > 0.0:
        raise DomainError("dt must be positive")
    z = np.asarray(z, dtype=float)
    sub = float(dt)
    y = z
    for halvings in range(max_halvings + 1):
        y, ok, err = attempt_step(z, chi, rm, sub, rtol=rtol, atol=atol)
        if ok:
            drift = float(np.max(np.abs(rho(y) - rho(z))))
            return y, StepReport(dt=sub, mass_drift=drift,
                                 min_component=float(np.min(y)),
                                 halvings=halvings, error_ratio=err)
        sub *= 0.5
    alpha = None
    if np.min(y) < 0.0:
        alpha = 1 + int(np.unravel_index(np.argmin(y), y.shape)[-1])
    raise StepFailureError("kinetics step cannot maintain positivity/accuracy",
                           alpha=alpha, dt=sub)


def integrate_cell(z: np.ndarray, chi, rm: RateModel, t_end: float,
                   dt_init: float | None = None,
                   rtol: float = 1e-8, atol: float = 1e-12,
                   max_steps: int = 10_000_000) -> np.ndarray:
    """Adaptively integrate the cluster dynamics at frozen chi to t_end.

    Convenience driver built on ``attempt_step`` with the usual fifth-root
    step-size controller for the doubled RK4 pair.
    """
    z = np.asarray(z, dtype=float)
    t = 0.0
    dt = float(dt_init) if dt_init is not None else max(t_end / 256.0, 1e-12)
    for _ in range(max_steps):
        if t >= t_end:
            return z
        dt = min(dt, t_end - t)
        y, ok, err = attempt_step(z, chi, rm, dt, rtol=rtol, atol=atol)
        if ok:
            z = y
            t += dt
            grow = 0.9 * err ** -0.2 if err > 0.0 else 5.0
            dt *= min(5.0, max(0.2, grow))
        else:
            if dt <= 1e-15 * max(t_end, 1.0):
                raise StepFailureError("kinetics integration stalled", dt=dt)
            dt *= 0.5
    raise StepFailureError("kinetics integration exceeded step budget", dt=dt)


def validate_cluster_state(z) -> np.ndarray:
    """Check finiteness and non-negativity of a cluster state array."""
    z = np.asarray(z, dtype=float)
    if z.ndim < 1 or z.shape[-1] < 1:
        raise DomainError("cluster state must have at least one size entry")
    if not np.all(np.isfinite(z)):
        raise DomainError("cluster state contains non-finite entries")
    if np.any(z < 0.0):
        raise DomainError("cluster state contains negative number densities")
    return z


@dataclass(frozen=True)
class GrowthReport:
    """Advisory diagnostics for the rate-growth admissibility conditions."""

    gamma: np.ndarray
    monotone: bool
    monotone_violations: np.ndarray
    decay_slope: float
    decay_ok: bool
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.monotone and self.decay_ok


def check_growth_assumptions(rm: RateModel, k_values, chi_values, n: int | None = None) -> GrowthReport:
    """Evaluate the rate-majorant conditions on the truncated size range.

    Computes ``gamma_a = max(R_a^(1/b1), K R_a^(1/b1), R_a^(1/b2), K R_a^(1/b2))``
    over the supplied chi samples and K values, then reports whether the
    majorant is non-increasing in a and whether gamma_a/a decays (fitted
    log-log slope).  Advisory only: violations become warnings, never errors.
    """
    n = rm.n if n is None else int(n)
    chi_values = np.atleast_1d(np.asarray(chi_values, dtype=float))
    k_values = np.atleast_1d(np.asarray(k_values, dtype=float)).ravel()
    gamma = np.zeros(n)
    for chi in chi_values:
        mixed = (rm.e2[:n] + chi * (rm.e1[:n] - rm.e2[:n]) - float(np.asarray(rm.e_act(chi))))
        expo = mixed / rm.kb_theta
        for b in (rm.b1, rm.b2):
            with np.errstate(over="ignore"):
                gamma = np.maximum(gamma, np.exp(np.minimum(expo / b, EXP_CAP)))
    gamma = gamma * max(1.0, float(np.max(k_values)))

    viol = np.where(gamma[1:] > gamma[:-1] * (1.0 + 1e-12))[0] + 2
    monotone = viol.size == 0
    alphas = np.arange(1, n + 1, dtype=float)
    with np.errstate(divide="ignore"):
        slope = float(np.polyfit(np.log(alphas), np.log(gamma / alphas), 1)[0]) if n >= 2 else -1.0
    decay_ok = slope < 0.0

    warnings = []
    if not monotone:
        warnings.append(
            f"(A3) rate majorant gamma_a increases at {viol.size} size(s), "
            f"first at alpha={int(viol[0])}")
    if not decay_ok:
        warnings.append(
            f"(A3) gamma_a/a does not decay on 1..{n} (fitted slope {slope:+.3f})")
    return GrowthReport(gamma=gamma, monotone=monotone, monotone_violations=viol,
                        decay_slope=slope, decay_ok=decay_ok, warnings=warnings)

"""Free-energy evaluation and the dissipation diagnostics.

The total free energy combines per-phase cluster free energies, the
entropy of mixing of the phase indicator, and an interfacial gradient
penalty.  It can be evaluated in two algebraically equal forms: the
direct phase-interpolated form and the rewritten form that absorbs the
reaction rates.  Their agreement (to round-off) is a built-in
consistency check on the Arrhenius rate law.

The dissipation report evaluates the two non-positive terms that the
model equates with dF/dt: the cluster-flux dissipation and the phase
relaxation term.  Comparing their sum with a finite difference of F is
the runtime second-law check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from . import kinetics
from .errors import DomainError
from .grids import GridSpec, gradient_squared_integral, laplacian, mollify
from .kinetics import RateModel

# Relative tolerance for the debug-mode identity between the two free
# energy forms; round-off accumulates over per-size sums.
FORM_IDENTITY_RTOL = 1e-10


@dataclass(frozen=True)
class PhaseParams:
    """Phase-field parameters: relaxation time, interface width, temperature."""

    tau: float
    gamma: float
    theta: float

    def validate(self) -> None:
        for name, v in (("tau", self.tau), ("gamma", self.gamma), ("theta", self.theta)):
            if not v > 0.0:
                raise DomainError(f"{name} must be positive, got {v}")


@dataclass(frozen=True)
class EnergyBreakdown:
    """Total free energy split into its three contributions."""

    bulk: float
    mixing: float
    gradient: float
    total: float

    def as_dict(self) -> dict:
        return {"bulk": self.bulk, "mixing": self.mixing,
                "gradient": self.gradient, "total": self.total}


@dataclass(frozen=True)
class DissipationReport:
    """Second-law bookkeeping over one step.

    ``bd_term`` is the cluster-flux dissipation integral, ``ac_term`` the
    phase-relaxation integral; both are non-positive when the
    condensation prefactor is self-consistent.  ``defect`` measures how
    far the finite-difference dF/dt is from their sum; it shrinks
    linearly with dt on smooth trajectories.
    """

    bd_term: float
    ac_term: float
    dfdt_numeric: float
    defect: float

    def as_dict(self) -> dict:
        return {"bd_term": self.bd_term, "ac_term": self.ac_term,
                "dfdt_numeric": self.dfdt_numeric, "defect": self.defect}


def double_well(chi):
    """Mixing potential W(chi) = chi ln(chi) + (1-chi) ln(1-chi) on (0,1)."""
    chi = np.asarray(chi, dtype=float)
    if np.any(chi <= 0.0) or np.any(chi >= 1.0):
        raise DomainError("double_well requires 0 < chi < 1")
    out = chi * np.log(chi) + (1.0 - chi) * np.log(1.0 - chi)
    return float(out) if out.ndim == 0 else out


def double_well_prime(chi):
    """W'(chi) = ln(chi) - ln(1-chi); diverges at the interval ends."""
    chi = np.asarray(chi, dtype=float)
    if np.any(chi <= 0.0) or np.any(chi >= 1.0):
        raise DomainError("double_well_prime requires 0 < chi < 1")
    out = np.log(chi) - np.log(1.0 - chi)
    return float(out) if out.ndim == 0 else out


def mixing_potential_extended(chi):
    """W(chi) continuously extended with W(0) = W(1) = 0 (x ln x limit)."""
    chi = np.asarray(chi, dtype=float)
    if np.any(chi < 0.0) or np.any(chi > 1.0):
        raise DomainError("phase indicator chi must lie in [0, 1]")
    return xlogy(chi, chi) + xlogy(1.0 - chi, 1.0 - chi)


def phase_free_energy(z: np.ndarray, l: int, rm: RateModel):
    """Cluster free energy of a pure phase.

    ``kb_theta * sum_a z_a * (b_l ln(z_a / N(z)) + E_a^l / kb_theta)``
    with the x ln x -> 0 convention for vanishing entries; the all-zero
    state contributes nothing.  Broadcasts over leading cell axes.
    """
    if l not in (1, 2):
        raise DomainError("phase index l must be 1 or 2")
    z = np.asarray(z, dtype=float)
    b = rm.b1 if l == 1 else rm.b2
    e = rm.e1 if l == 1 else rm.e2
    n_tot = kinetics.count_n(z)
    safe_n = np.where(n_tot > 0.0, n_tot, 1.0)
    entropy = np.sum(xlogy(z, z / safe_n[..., None]), axis=-1)
    out = rm.kb_theta * b * entropy + z @ e
    return float(out) if np.ndim(out) == 0 else out


def bulk_density_direct(z: np.ndarray, chi, rm: RateModel):
    """Phase-interpolated bulk density chi*f1(z) + (1-chi)*f2(z) per cell."""
    chi = np.asarray(chi, dtype=float)
    f1 = phase_free_energy(z, 1, rm)
    f2 = phase_free_energy(z, 2, rm)
    return f2 + chi * (f1 - f2)


def bulk_density_rewritten(z: np.ndarray, chi, rm: RateModel):
    """Bulk density in the rate-absorbing form.

    ``kb_theta * sum_a z_a * (b_chi ln(z_a R_a^(1/b_chi) / N(z)) + E_A(chi)/kb_theta)``
    which equals the direct form whenever the rates follow the Arrhenius
    law; evaluated through its own floating-point path so the identity
    is a real cross-check.
    """
    z = np.asarray(z, dtype=float)
    chi = np.asarray(chi, dtype=float)
    b = np.asarray(kinetics.b_mix(chi, rm))
    ge = kinetics.evaporation_coeff(chi, rm)
    n_tot = kinetics.count_n(z)
    safe_n = np.where(n_tot > 0.0, n_tot, 1.0)
    entropy = np.sum(xlogy(z, z * ge / safe_n[..., None]), axis=-1)
    e_act = np.asarray(rm.e_act(chi), dtype=float)
    out = rm.kb_theta * b * entropy + e_act * n_tot
    return float(out) if np.ndim(out) == 0 else out


def reduced_free_energy(z: np.ndarray, chi, rm: RateModel):
    """Per-cell cluster free energy used by the fixed-phase decay bound.

    The rate-absorbing bulk density with zero entropic offset; on a
    single cell it equals the bulk part of the total free energy divided
    by the cell volume.
    """
    return bulk_density_rewritten(z, chi, rm)


def total_free_energy(z_field: np.ndarray, chi: np.ndarray, grid: GridSpec,
                      pp: PhaseParams, rm: RateModel,
                      form: str = "direct") -> EnergyBreakdown:
    """Discrete total free energy over the domain (midpoint quadrature).

    ``form`` selects the bulk evaluation path ("direct" or "rewritten");
    under the Arrhenius rate law both agree to round-off, which is
    asserted when Python runs with __debug__.
    """
    z_field = np.asarray(z_field, dtype=float)
    chi = np.asarray(chi, dtype=float)
    if form == "direct":
        density = bulk_density_direct(z_field, chi, rm)
    elif form == "rewritten":
        density = bulk_density_rewritten(z_field, chi, rm)
    else:
        raise DomainError(f"unknown free-energy form {form!r}")
    vol = grid.cell_volume
    bulk = float(np.sum(density)) * vol
    if __debug__:
        other = bulk_density_rewritten if form == "direct" else bulk_density_direct
        bulk_other = float(np.sum(other(z_field, chi, rm))) * vol
        scale = max(1.0, abs(bulk), abs(bulk_other))
        assert abs(bulk - bulk_other) <= FORM_IDENTITY_RTOL * scale, (
            "free-energy form identity violated: "
            f"{bulk!r} vs {bulk_other!r}")
    mixing = pp.theta * float(np.sum(mixing_potential_extended(chi))) * vol
    gradient = 0.5 * pp.theta * pp.gamma * gradient_squared_integral(chi, grid)
    return EnergyBreakdown(bulk=bulk, mixing=mixing, gradient=gradient,
                           total=bulk + mixing + gradient)


def chi_functional_derivative(z_eps: np.ndarray, chi, lap_chi, pp: PhaseParams,
                              rm: RateModel):
    """Variational derivative of F with respect to the phase indicator.

    ``f1(z_eps) - f2(z_eps) + theta*W'(chi) - theta*gamma*lap_chi``
    evaluated per cell; the caller supplies the mollified cluster state
    and the discrete Laplacian of chi.
    """
    f1 = phase_free_energy(z_eps, 1, rm)
    f2 = phase_free_energy(z_eps, 2, rm)
    return f1 - f2 + pp.theta * double_well_prime(chi) - pp.theta * pp.gamma * np.asarray(lap_chi)


def flux_dissipation_summands(z: np.ndarray, chi, k, rm: RateModel) -> np.ndarray:
    """Per-reaction dissipation terms, shape (..., n-1); each is <= 0.

    Summand a is ``kb_theta * b_chi * (d_a - c_a) * ln(c_a / d_a)`` with
    ``d_a = K R_a^(1/b) z_a`` (condensation product) and
    ``c_a = R_{a+1}^(1/b) z_{a+1}`` (evaporation product).  Summands in
    which either product vanishes contribute zero by continuous
    extension; their entropy production is a transient of measure zero.
    """
    z = np.asarray(z, dtype=float)
    chi = np.asarray(chi, dtype=float)
    b = np.asarray(kinetics.b_mix(chi, rm))
    ge = kinetics.evaporation_coeff(chi, rm)
    k = np.asarray(k, dtype=float)
    d = k[..., None] * ge[..., :-1] * z[..., :-1]
    c = ge[..., 1:] * z[..., 1:]
    live = (c > 0.0) & (d > 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(live, np.log(np.where(live, c, 1.0) / np.where(live, d, 1.0)), 0.0)
    out = (d - c) * ratio
    return (rm.kb_theta * b)[..., None] * out


def flux_dissipation_integral(z_field: np.ndarray, chi, k, rm: RateModel,
                              grid: GridSpec) -> float:
    """Cluster-flux dissipation integrated over the domain; <= 0."""
    s = flux_dissipation_summands(z_field, chi, k, rm)
    return float(np.sum(s)) * grid.cell_volume


def phase_dissipation_integral(z_eps_field: np.ndarray, chi: np.ndarray,
                               grid: GridSpec, pp: PhaseParams,
                               rm: RateModel) -> float:
    """Phase-relaxation dissipation -(1/tau) * integral of (dF/dchi)^2; <= 0.

    Uses the mollified cluster field, i.e. the same drive that actually
    moves the phase indicator, so the term is non-positive by
    construction.
    """
    dfdchi = chi_functional_derivative(z_eps_field, chi, laplacian(chi, grid), pp, rm)
    return -float(np.sum(dfdchi * dfdchi)) * grid.cell_volume / pp.tau


def fdecay_constant(rm: RateModel, chi_values, k_values, n: int | None = None) -> float:
    """Constant of the quantitative free-energy decay bound.

    ``kb_theta * min(b1, b2) * min_a(a / gamma_a)`` with the rate
    majorant gamma taken over the supplied phase and prefactor samples.
    """
    rep = kinetics.check_growth_assumptions(rm, k_values, chi_values, n=n)
    alphas = np.arange(1, rep.gamma.size + 1, dtype=float)
    return rm.kb_theta * rm.b_min * float(np.min(alphas / rep.gamma))


def dissipation_report(state, pp: PhaseParams, rm: RateModel, dt: float,
                       state_next=None) -> DissipationReport:
    """Evaluate the second-law balance over one step of size dt.

    Both dissipation terms are computed at the current state by
    quadrature; the numeric dF/dt is a one-sided difference to the state
    at t + dt.  When ``state_next`` is omitted a probe step is taken
    with the engine's composite update.  ``defect`` is the absolute gap
    between the finite difference and the sum of the two terms.
    """
    if not dt > 0.0:
        raise DomainError("dt must be positive")
    if state_next is None:
        # deferred import: the engine imports this module
        from .engine import composite_step

        state_next, _ = composite_step(state, pp, rm, dt)
    grid = state.grid
    k = kinetics.effective_k(state.cells, state.phase.chi, rm)
    bd = flux_dissipation_integral(state.cells, state.phase.chi, k, rm, grid)
    z_eps = mollify(state.cells, state.kernel, grid)
    ac = phase_dissipation_integral(z_eps, state.phase.chi, grid, pp, rm)
    f0 = total_free_energy(state.cells, state.phase.chi, grid, pp, rm).total
    f1 = total_free_energy(state_next.cells, state_next.phase.chi, grid, pp, rm).total
    dfdt = (f1 - f0) / dt
    return DissipationReport(bd_term=bd, ac_term=ac, dfdt_numeric=dfdt,
                             defect=abs(dfdt - (bd + ac)))

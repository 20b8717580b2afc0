"""Kullback divergence and classical/quantum Fisher information.

All logarithms are natural (nats). Infinite divergences and Fisher values
are returned as ``math.inf`` rather than raised, so sweeps can record them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import _check_dims, as_operator, as_state, energy_moments, propagator
from .measurement import Povm, _born, as_distribution, outcome_distribution, rho_derivatives

PROB_FLOOR = 1e-12
MIN_FD_STEP = 1e-8

FisherMethod = Literal["analytic", "finite-difference", "vertex-limit"]

__all__ = [
    "FisherReport",
    "ExpansionCheck",
    "kl_divergence",
    "classical_fisher_analytic",
    "classical_fisher_fd",
    "classical_fisher",
    "quantum_fisher",
    "quantum_fisher_energy",
    "kl_fisher_expansion_ratio",
]


@dataclass(frozen=True)
class FisherReport:
    value: float
    method: FisherMethod

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError(f"Fisher information must be >= 0, got {self.value}")

    def __float__(self):
        return float(self.value)


def kl_divergence(p, q) -> float:
    """D(p||q) = sum_i p_i log(p_i / q_i) in nats.

    Terms with p_i = 0 contribute nothing; q_i = 0 < p_i gives ``math.inf``.
    This is the standard sign convention, non-negative and zero only at p = q.
    """
    p = as_distribution(p).probs
    q = as_distribution(q).probs
    if p.shape != q.shape:
        raise ValueError(f"outcome count mismatch: {p.size} vs {q.size}")
    mask = p > 0
    if np.any(q[mask] == 0):
        return math.inf
    d = float(np.sum(p[mask] * np.log(p[mask] / q[mask])))
    return max(d, 0.0)


def _fisher_sum(p, dp, d2p, floor=PROB_FLOOR):
    """Sum dp^2/p over outcomes, with the 0/0 limit where p = dp = 0.

    At a vanishing outcome p(t) ~ d2p (t - t0)^2 / 2, so dp^2/p -> 2 d2p.
    Returns (value, used_vertex_limit).
    """
    total, vertex = 0.0, False
    for pi, dpi, d2pi in zip(p, dp, d2p):
        if pi > floor:
            total += dpi * dpi / pi
        elif abs(dpi) <= floor:
            vertex = True
            total += 2.0 * max(d2pi, 0.0)
        else:
            return math.inf, vertex
    return total, vertex


def classical_fisher_analytic(psi0, H, hbar: float, povm: Povm) -> FisherReport:
    """J_M(t0) = sum_x pdot(x)^2 / p(x) from the exact derivatives of rho(t).

    Outcomes that vanish at t0 are handled by the series limit 2 * pddot(x).
    """
    psi0, H = as_state(psi0), as_operator(H)
    _check_dims(psi0, H, povm)
    rho, drho, d2rho = rho_derivatives(psi0, H, hbar)
    M = povm.stacked()
    # Tr(A M_k) for every element at once
    p = np.einsum("ij,kji->k", rho, M).real
    dp = np.einsum("ij,kji->k", drho, M).real
    d2p = np.einsum("ij,kji->k", d2rho, M).real
    value, vertex = _fisher_sum(p, dp, d2p)
    return FisherReport(value, "vertex-limit" if vertex else "analytic")


def classical_fisher_fd(psi0, H, hbar: float, povm: Povm, step: float = 1e-3) -> FisherReport:
    """Central-difference estimate of J_M(t0), independent of the analytic path.

    The outcome distribution is evaluated on states evolved by +-step; the
    first derivative uses the symmetric quotient and the vertex case the
    second difference.
    """
    if step < MIN_FD_STEP:
        raise ValueError(f"step {step:g} < {MIN_FD_STEP:g}: finite differences are roundoff-dominated")
    psi0, H = as_state(psi0), as_operator(H)
    _check_dims(psi0, H, povm)
    U = propagator(H, step, hbar)
    a = psi0.amplitudes
    M = povm.stacked()
    p0 = _born(a, M)
    pp = _born(U @ a, M)
    pm = _born(U.conj().T @ a, M)
    dp = (pp - pm) / (2 * step)
    d2p = (pp - 2 * p0 + pm) / step**2
    value = 0.0
    for pi, dpi, d2pi in zip(p0, dp, d2p):
        if pi > PROB_FLOOR:
            value += dpi * dpi / pi
        else:
            value += 2.0 * max(d2pi, 0.0)
    return FisherReport(value, "finite-difference")


def classical_fisher(psi0, H, hbar: float, povm: Povm) -> float:
    return classical_fisher_analytic(psi0, H, hbar, povm).value


def quantum_fisher(psi0, H, hbar: float = 1.0) -> float:
    """J^s = 4 Tr[rho (drho/dt)^2] for rho = |psi0><psi0|."""
    rho, drho, _ = rho_derivatives(psi0, H, hbar)
    return max(float(4.0 * np.trace(rho @ drho @ drho).real), 0.0)


def quantum_fisher_energy(psi0, H, hbar: float = 1.0) -> float:
    """J^s = 4 Var(H) / hbar^2, the pure-state closed form."""
    return 4.0 * energy_moments(psi0, H).variance / hbar**2


@dataclass(frozen=True)
class ExpansionCheck:
    ratio: float
    regular: bool
    kl: float
    fisher: float


def kl_fisher_expansion_ratio(
    psi0,
    H,
    hbar: float,
    povm: Povm,
    dtheta: float,
    direction: Literal["stein", "appendix"] = "stein",
) -> ExpansionCheck:
    """Ratio of the divergence between nearby outcome models to (1/2) J dtheta^2.

    ``direction="stein"`` uses D(p_t0 || p_t0+dtheta), the orientation that
    enters the type-II error exponent; ``"appendix"`` uses
    D(p_t0+dtheta || p_t0). Both agree to second order at interior points.

    The model is *regular* when no outcome sits on a simplex vertex at t0
    with a non-zero curvature term (p = 0 but d2p > 0). At such vertices the
    quadratic expansion fails: the projector measurement onto the initial
    state gives a ratio near 1/2 in the ``stein`` direction and an infinite
    divergence in the other.
    """
    psi0, H = as_state(psi0), as_operator(H)
    _check_dims(psi0, H, povm)
    rho, drho, d2rho = rho_derivatives(psi0, H, hbar)
    M = povm.stacked()
    p0 = np.einsum("ij,kji->k", rho, M).real
    d2p = np.einsum("ij,kji->k", d2rho, M).real
    regular = not bool(np.any((p0 <= PROB_FLOOR) & (d2p > PROB_FLOOR)))

    J = classical_fisher_analytic(psi0, H, hbar, povm).value
    if J == 0:
        raise ValueError("zero Fisher information: the expansion ratio is undefined")

    pt = outcome_distribution(psi0, povm)
    U = propagator(H, dtheta, hbar)
    ps = outcome_distribution(U @ psi0.amplitudes, povm)
    if direction == "stein":
        kl = kl_divergence(pt, ps)
    elif direction == "appendix":
        kl = kl_divergence(ps, pt)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return ExpansionCheck(kl / (0.5 * J * dtheta**2), regular, kl, J)

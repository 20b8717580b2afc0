"""POVMs and the outcome distributions they induce on pure states."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    _check_dims,
    as_operator,
    as_state,
    energy_moments,
)
from .errors import DimensionError, NormalizationError, PositivityError, StationaryStateError

POVM_TOL = 1e-10
PROB_TOL = 1e-12
SUM_TOL = 1e-9
DEGENERACY_TOL = 1e-9
STATIONARY_TOL = 1e-12
# Born probabilities below this are roundoff from an exact zero
ROUNDOFF_ZERO = 64 * np.finfo(float).eps

__all__ = [
    "Povm",
    "OutcomeDistribution",
    "outcome_distribution",
    "projector_test_povm",
    "sld_optimal_povm",
    "random_povm",
    "trivial_povm",
    "rho_derivatives",
]


@dataclass(frozen=True, eq=False)
class Povm:
    """Finite POVM: positive semidefinite elements summing to the identity.

    Outcome labels are the element indices 0..m-1.
    """

    elements: tuple

    def __post_init__(self):
        els = tuple(as_operator(e) for e in self.elements)
        if len(els) < 2:
            raise ValueError("a POVM needs at least two elements")
        _check_dims(*els)
        for i, e in enumerate(els):
            lo = float(np.linalg.eigvalsh(e.matrix)[0])
            if lo < -POVM_TOL:
                raise PositivityError(f"POVM element {i} has eigenvalue {lo:.3e} < 0")
        total = sum(e.matrix for e in els)
        dev = float(np.max(np.abs(total - np.eye(els[0].dim))))
        if dev > POVM_TOL:
            raise NormalizationError(f"POVM elements sum to identity only within {dev:.3e}")
        object.__setattr__(self, "elements", els)

    @property
    def dim(self) -> int:
        return self.elements[0].dim

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def stacked(self) -> np.ndarray:
        """Elements as an (m, d, d) array."""
        return np.stack([e.matrix for e in self.elements])


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).copy()
        if p.ndim != 1 or p.size < 1:
            raise ValueError("probabilities must be a non-empty vector")
        if np.any(p < -PROB_TOL) or not np.all(np.isfinite(p)):
            raise ValueError(f"invalid probabilities {p}")
        p[p < 0] = 0.0
        if abs(p.sum() - 1.0) > PROB_TOL * max(1, p.size):
            raise NormalizationError(f"probabilities sum to {p.sum()!r}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self):
        return self.probs.size

    def __iter__(self):
        return iter(self.probs)

    def __getitem__(self, i):
        return self.probs[i]


def as_distribution(p) -> OutcomeDistribution:
    return p if isinstance(p, OutcomeDistribution) else OutcomeDistribution(p)


def _born(amps: np.ndarray, stacked: np.ndarray) -> np.ndarray:
    return np.einsum("i,kij,j->k", amps.conj(), stacked, amps).real


def outcome_distribution(psi, povm: Povm) -> OutcomeDistribution:
    psi = as_state(psi)
    _check_dims(psi, povm)
    p = _born(psi.amplitudes, povm.stacked())
    if abs(p.sum() - 1.0) > SUM_TOL:
        raise NormalizationError(f"outcome probabilities sum to {p.sum()!r}")
    p = np.where(p < ROUNDOFF_ZERO, 0.0, p)
    # absorb the last-ulp drift so the strict distribution check holds
    return OutcomeDistribution(p / p.sum())


def trivial_povm(d: int, m: int = 2) -> Povm:
    """m copies of I/m; carries no information about the state."""
    return Povm(tuple(np.eye(d) / m for _ in range(m)))


def projector_test_povm(psi0) -> Povm:
    """Two-outcome measurement {|0><0|, Q0 = 1 - |0><0|}.

    Outcome 0 supports "still in the initial state", outcome 1 the
    alternative; the probability of outcome 1 after evolution is the
    sudden-approximation error w.
    """
    psi0 = as_state(psi0)
    P = psi0.density_matrix()
    return Povm((P, np.eye(psi0.dim) - P))


def rho_derivatives(psi0, H, hbar: float = 1.0):
    """(rho, drho/dt, d2rho/dt2) at t0 for the unitary family generated by H.

    drho = -(i/hbar)[H, rho],  d2rho = -(1/hbar^2)[H, [H, rho]].
    """
    psi0, H = as_state(psi0), as_operator(H)
    _check_dims(psi0, H)
    rho = psi0.density_matrix()
    h = H.matrix
    c1 = h @ rho - rho @ h
    drho = -1j * c1 / hbar
    c2 = h @ c1 - c1 @ h
    d2rho = -c2 / hbar**2
    return rho, drho, d2rho


def _spectral_projectors(L: np.ndarray, tol: float = DEGENERACY_TOL):
    w, v = np.linalg.eigh(L)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    groups, start = [], 0
    for i in range(1, len(w) + 1):
        if i == len(w) or abs(w[i] - w[start]) > tol:
            vs = v[:, start:i]
            groups.append((float(w[start:i].mean()), vs @ vs.conj().T))
            start = i
    return groups


def sld_optimal_povm(psi0, H, hbar: float = 1.0) -> Povm:
    """Projective measurement on the eigenbasis of the symmetric logarithmic derivative.

    For a pure state the SLD is L = 2 drho/dt. Eigenvalues equal within
    1e-9 are merged into one spectral projector, ordered by decreasing
    eigenvalue. The classical Fisher information of this measurement equals
    the quantum Fisher information 4 Var(H) / hbar^2.

    Raises
    ------
    StationaryStateError
        If ``psi0`` has zero energy variance, so the SLD vanishes.
    """
    psi0, H = as_state(psi0), as_operator(H)
    _check_dims(psi0, H)
    var = energy_moments(psi0, H).variance
    scale = max(1.0, float(np.max(np.abs(H.matrix)))) ** 2
    if var <= STATIONARY_TOL * scale:
        raise StationaryStateError("stationary state: the energy variance vanishes, SLD is zero")
    _, drho, _ = rho_derivatives(psi0, H, hbar)
    L = 2.0 * drho
    return Povm(tuple(P for _, P in _spectral_projectors(0.5 * (L + L.conj().T))))


def random_povm(d: int, m: int, seed: int) -> Povm:
    """Random m-outcome POVM on C^d, deterministic in ``seed``.

    Draws m complex Ginibre matrices G_k, forms A_k = G_k G_k^dag and
    normalizes M_k = S^{-1/2} A_k S^{-1/2} with S = sum_k A_k.
    """
    if d < 2 or m < 2:
        raise DimensionError("random_povm needs d >= 2 and m >= 2")
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(m, d, d)) + 1j * rng.normal(size=(m, d, d))
    A = g @ np.conj(np.swapaxes(g, 1, 2))
    S = A.sum(axis=0)
    w, v = np.linalg.eigh(S)
    s_inv_half = (v / np.sqrt(w)) @ v.conj().T
    M = s_inv_half @ A @ s_inv_half
    M = 0.5 * (M + np.conj(np.swapaxes(M, 1, 2)))
    # put the rounding residue of the completeness relation on the last element
    M[-1] += np.eye(d) - M.sum(axis=0)
    return Povm(tuple(M))

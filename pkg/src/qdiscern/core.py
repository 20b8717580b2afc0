"""Pure states, Hermitian operators and unitary time evolution.

Also provides the sudden-approximation error probability ``w`` (the
probability of leaving the initial state after a Hamiltonian switch) in
both its exact form and its leading-order expansion in the switching time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, HermiticityError, NormalizationError

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
POST_TOL = 1e-10

__all__ = [
    "PureState",
    "HermitianOperator",
    "HamiltonianSchedule",
    "EnergyMoments",
    "propagator",
    "evolve_constant",
    "evolve_schedule",
    "average_hamiltonian",
    "energy_moments",
    "sudden_error_exact",
    "sudden_error_perturbative",
    "pauli",
    "basis_state",
    "random_state",
    "random_hermitian",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit vector in C^d, d >= 2."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.ndim != 1 or a.shape[0] < 2:
            raise DimensionError(f"state must be a vector of length >= 2, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise NormalizationError("state amplitudes must be finite")
        norm = np.linalg.norm(a)
        if abs(norm - 1.0) > NORM_TOL:
            raise NormalizationError(f"state norm is {float(norm)!r}, expected 1")
        object.__setattr__(self, "amplitudes", _frozen(a))

    @classmethod
    def normalized(cls, amplitudes) -> "PureState":
        a = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(a)
        if norm == 0 or not np.isfinite(norm):
            raise NormalizationError("cannot normalize a zero or non-finite vector")
        return cls(a / norm)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def overlap(self, other: "PureState") -> complex:
        """<self|other>"""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "PureState") -> float:
        return abs(self.overlap(other)) ** 2

    def __repr__(self):
        return f"PureState({np.array2string(self.amplitudes, precision=6)})"


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """d x d complex Hermitian matrix.

    The stored matrix is the exact Hermitian part of the input, so small
    asymmetries within tolerance do not leak into eigendecompositions.
    """

    matrix: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
            raise DimensionError(f"operator must be square with d >= 2, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise HermiticityError("operator entries must be finite")
        scale = max(1.0, float(np.max(np.abs(a))))
        asym = float(np.max(np.abs(a - a.conj().T)))
        if asym > HERMITIAN_TOL * scale:
            raise HermiticityError(f"operator is not Hermitian (max |A - A^H| = {asym:.3e})")
        object.__setattr__(self, "matrix", _frozen(0.5 * (a + a.conj().T)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigh(self):
        return np.linalg.eigh(self.matrix)

    def __add__(self, other):
        return HermitianOperator(self.matrix + _as_matrix(other))

    def __sub__(self, other):
        return HermitianOperator(self.matrix - _as_matrix(other))

    def __mul__(self, c):
        c = float(c)
        return HermitianOperator(self.matrix * c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"HermitianOperator(\n{np.array2string(self.matrix, precision=6)})"


def _as_matrix(x) -> np.ndarray:
    return x.matrix if isinstance(x, HermitianOperator) else np.asarray(x, dtype=complex)


def as_operator(x) -> HermitianOperator:
    return x if isinstance(x, HermitianOperator) else HermitianOperator(x)


def as_state(x) -> PureState:
    return x if isinstance(x, PureState) else PureState(x)


def _check_dims(*objs):
    dims = {o.dim for o in objs}
    if len(dims) != 1:
        raise DimensionError(f"dimension mismatch: {sorted(dims)}")


@dataclass(frozen=True, eq=False)
class HamiltonianSchedule:
    """Piecewise-constant H(t) on [t0, t0 + total_duration].

    ``segments`` is an ordered sequence of ``(operator, duration)`` pairs,
    applied first to last.
    """

    segments: tuple
    t0: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        segs = []
        for op, dur in self.segments:
            op = as_operator(op)
            dur = float(dur)
            if not dur > 0 or not np.isfinite(dur):
                raise ValueError(f"segment durations must be positive and finite, got {dur}")
            segs.append((op, dur))
        if segs:
            _check_dims(*(op for op, _ in segs))
        if not float(self.hbar) > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        object.__setattr__(self, "segments", tuple(segs))
        object.__setattr__(self, "hbar", float(self.hbar))
        object.__setattr__(self, "t0", float(self.t0))

    @classmethod
    def constant(cls, H, duration: float, hbar: float = 1.0, t0: float = 0.0):
        return cls(((as_operator(H), duration),), t0=t0, hbar=hbar)

    @property
    def dim(self) -> int:
        if not self.segments:
            raise DimensionError("empty schedule has no dimension")
        return self.segments[0][0].dim

    @property
    def total_duration(self) -> float:
        return float(sum(d for _, d in self.segments))

    @property
    def t1(self) -> float:
        return self.t0 + self.total_duration

    def initial_hamiltonian(self) -> HermitianOperator:
        """H(t0), the generator at the reference time."""
        if not self.segments:
            raise DimensionError("empty schedule has no Hamiltonian")
        return self.segments[0][0]

    def scaled_to(self, duration: float) -> "HamiltonianSchedule":
        """Same switching profile compressed or stretched to ``duration``.

        Duration fractions are kept. A zero duration gives an empty schedule.
        """
        if duration < 0:
            raise ValueError("duration must be >= 0")
        if duration == 0:
            return HamiltonianSchedule((), t0=self.t0, hbar=self.hbar)
        f = duration / self.total_duration
        return HamiltonianSchedule(
            tuple((op, d * f) for op, d in self.segments), t0=self.t0, hbar=self.hbar
        )

    def truncated(self, duration: float) -> "HamiltonianSchedule":
        """H(t) restricted to [t0, t0 + duration].

        Past the end of the schedule the last segment's Hamiltonian is held.
        """
        if duration < 0:
            raise ValueError("duration must be >= 0")
        out, left = [], float(duration)
        for i, (op, d) in enumerate(self.segments):
            if left <= 0:
                break
            last = i == len(self.segments) - 1
            take = left if last else min(d, left)
            out.append((op, take))
            left -= take
        return HamiltonianSchedule(tuple(out), t0=self.t0, hbar=self.hbar)


@dataclass(frozen=True)
class EnergyMoments:
    mean: float
    variance: float

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))


def propagator(H, dt: float, hbar: float = 1.0) -> np.ndarray:
    """exp(-i H dt / hbar) by Hermitian eigendecomposition. ``dt`` may be negative."""
    H = as_operator(H)
    w, v = H.eigh()
    phases = np.exp(-1j * w * (dt / hbar))
    return (v * phases) @ v.conj().T


def _post_check(phi: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(phi)
    if abs(norm - 1.0) > POST_TOL:
        raise NormalizationError(f"evolution lost unitarity (norm {norm!r})")
    # renormalize the ~1e-15 drift so the result passes the construction check
    return phi / norm


def evolve_constant(H, dt: float, hbar: float, psi) -> PureState:
    """Apply exp(-i H dt / hbar) to ``psi``.

    >>> import numpy as np
    >>> plus = PureState(np.array([1, 1]) / np.sqrt(2))
    >>> evolve_constant(pauli("z"), 0.0, 1.0, plus) is plus
    True
    """
    H, psi = as_operator(H), as_state(psi)
    _check_dims(H, psi)
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    if hbar <= 0:
        raise ValueError(f"hbar must be positive, got {hbar}")
    if dt == 0:
        return psi
    phi = propagator(H, dt, hbar) @ psi.amplitudes
    return PureState(_post_check(phi))


def evolve_schedule(sched: HamiltonianSchedule, psi) -> PureState:
    """Evolve ``psi`` through every segment in order. An empty schedule returns ``psi``."""
    psi = as_state(psi)
    if not sched.segments:
        return psi
    _check_dims(sched, psi)
    out = psi
    for H, dur in sched.segments:
        out = evolve_constant(H, dur, sched.hbar, out)
    return out


def average_hamiltonian(sched: HamiltonianSchedule) -> HermitianOperator:
    """Time average of H(t) over the schedule window."""
    T = sched.total_duration
    if T <= 0:
        raise ValueError("schedule has zero total duration")
    acc = sum(op.matrix * d for op, d in sched.segments)
    return HermitianOperator(acc / T)


def energy_moments(psi, H) -> EnergyMoments:
    """Mean and variance of ``H`` in ``psi``.

    The variance is computed as ||(H - <H>) psi||^2, which is non-negative
    by construction and avoids the cancellation in <H^2> - <H>^2.
    """
    psi, H = as_state(psi), as_operator(H)
    _check_dims(psi, H)
    a = psi.amplitudes
    Ha = H.matrix @ a
    mean = float(np.vdot(a, Ha).real)
    r = Ha - mean * a
    var = float(np.vdot(r, r).real)
    return EnergyMoments(mean, max(var, 0.0))


def _leave_probability(psi0: PureState, phi: np.ndarray) -> float:
    a = psi0.amplitudes
    q = phi - a * np.vdot(a, phi)
    w = float(np.vdot(q, q).real)
    return min(max(w, 0.0), 1.0)


def sudden_error_exact(sched: HamiltonianSchedule, psi0) -> float:
    """w = <0|U^dag Q0 U|0> = 1 - |<0|U|0>|^2 for the whole schedule.

    Evaluated as ||Q0 U psi0||^2, which keeps full relative precision when
    w is tiny.
    """
    psi0 = as_state(psi0)
    phi = evolve_schedule(sched, psi0)
    return _leave_probability(psi0, phi.amplitudes)


def sudden_error_perturbative(sched: HamiltonianSchedule, psi0) -> float:
    """Leading term dt^2 * Var(Hbar) / hbar^2 of the sudden-approximation error.

    Not clipped to [0, 1]: values above 1 signal that the expansion has broken down.
    """
    psi0 = as_state(psi0)
    T = sched.total_duration
    if T == 0:
        return 0.0
    Hbar = average_hamiltonian(sched)
    var = energy_moments(psi0, Hbar).variance
    return T * T * var / sched.hbar**2


_PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(name: str) -> HermitianOperator:
    return HermitianOperator(_PAULI[name.lower()])


def basis_state(d: int, k: int) -> PureState:
    a = np.zeros(d, dtype=complex)
    a[k] = 1.0
    return PureState(a)


def random_state(d: int, rng: np.random.Generator) -> PureState:
    z = rng.normal(size=d) + 1j * rng.normal(size=d)
    return PureState.normalized(z)


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> HermitianOperator:
    """GUE-like draw rescaled to spectral norm ``scale``."""
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = 0.5 * (z + z.conj().T)
    h *= scale / np.max(np.abs(np.linalg.eigvalsh(h)))
    return HermitianOperator(h)

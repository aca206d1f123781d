"""Small-dimension state vectors, projectors and observables.

Everything here is an immutable value. Arrays held by the types are
flagged read-only after construction so they can be shared freely.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TOL = 1e-12
MAX_DIM = 16


class DimensionError(ValueError):
    """Raised when two objects live in Hilbert spaces of different size."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.complex128, copy=True)
    arr.setflags(write=False)
    return arr


def _check_dim(dim: int) -> None:
    if dim < 2:
        raise ValueError(f"dimension must be >= 2, got {dim}")
    if dim > MAX_DIM:
        raise ValueError(f"dimension {dim} exceeds the supported maximum of {MAX_DIM}")


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains NaN or infinite entries")


def _same_dim(n: int, m: int) -> None:
    if n != m:
        raise DimensionError(f"dimension mismatch: {n} vs {m}")


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state. Construction fails on a non-unit norm;
    use :meth:`normalized` to opt into rescaling."""

    amplitudes: np.ndarray
    label: str = ""

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        _check_dim(amps.size)
        _check_finite(amps, "state amplitudes")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > TOL:
            raise ValueError(f"state is not normalized: sum |amplitude|^2 = {norm2!r}")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @classmethod
    def normalized(cls, amplitudes: Iterable[complex], label: str = "") -> "StateVector":
        amps = np.asarray(list(amplitudes), dtype=np.complex128)
        _check_finite(amps, "state amplitudes")
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(amps / norm, label)

    @classmethod
    def basis(cls, dim: int, index: int, label: str = "") -> "StateVector":
        amps = np.zeros(dim, dtype=np.complex128)
        amps[index] = 1.0
        return cls(amps, label or f"|{index}>")

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def __repr__(self):
        return f"StateVector({self.label or np.round(self.amplitudes, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class Projector:
    """Hermitian idempotent matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"projector must be a square matrix, got shape {m.shape}")
        _check_dim(m.shape[0])
        _check_finite(m, "projector")
        if np.max(np.abs(m - m.conj().T)) > TOL:
            raise ValueError("projector is not Hermitian")
        if np.max(np.abs(m @ m - m)) > TOL:
            raise ValueError("projector is not idempotent")
        if np.max(np.abs(m)) < TOL:
            raise ValueError("projector has rank 0")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def onto(cls, state: StateVector) -> "Projector":
        v = state.amplitudes
        return cls(np.outer(v, v.conj()))

    @classmethod
    def onto_basis(cls, dim: int, indices: Sequence[int]) -> "Projector":
        if not indices:
            raise ValueError("basis projector needs at least one index")
        m = np.zeros((dim, dim), dtype=np.complex128)
        for i in indices:
            if not 0 <= i < dim:
                raise ValueError(f"basis index {i} out of range for dimension {dim}")
            m[i, i] = 1.0
        return cls(m)

    @classmethod
    def identity(cls, dim: int) -> "Projector":
        return cls(np.eye(dim, dtype=np.complex128))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.matrix).real))

    def complement(self) -> "Projector":
        return Projector(np.eye(self.dim) - self.matrix)


@dataclass(frozen=True)
class Outcome:
    eigenvalue: float
    label: str
    projector: Projector


@dataclass(frozen=True)
class Observable:
    """Complete orthogonal decomposition given as (eigenvalue, label, projector) triples.

    Labels are the keys everywhere downstream; eigenvalues are only carried
    along for display.
    """

    name: str
    outcomes: tuple[Outcome, ...] = field(default=())

    def __post_init__(self):
        outs = tuple(
            o if isinstance(o, Outcome) else Outcome(float(o[0]), str(o[1]), o[2])
            for o in self.outcomes
        )
        object.__setattr__(self, "outcomes", outs)
        if not outs:
            raise ValueError(f"observable {self.name!r} has no outcomes")
        labels = [o.label for o in outs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"observable {self.name!r} has duplicate outcome labels {labels}")
        dim = outs[0].projector.dim
        for o in outs:
            _same_dim(dim, o.projector.dim)
        total = sum(o.projector.matrix for o in outs)
        if np.max(np.abs(total - np.eye(dim))) > TOL:
            raise ValueError(f"projectors of {self.name!r} do not sum to the identity")
        for i, oi in enumerate(outs):
            for oj in outs[i + 1:]:
                if np.max(np.abs(oi.projector.matrix @ oj.projector.matrix)) > TOL:
                    raise ValueError(
                        f"projectors {oi.label!r} and {oj.label!r} of {self.name!r} are not orthogonal"
                    )

    @property
    def dim(self) -> int:
        return self.outcomes[0].projector.dim

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(o.label for o in self.outcomes)

    def outcome(self, label: str) -> Outcome:
        for o in self.outcomes:
            if o.label == label:
                return o
        raise KeyError(f"observable {self.name!r} has no outcome {label!r}; known: {self.labels}")

    def projector(self, label: str) -> Projector:
        return self.outcome(label).projector


@dataclass(frozen=True)
class BlochDirection:
    """Polar angle ``theta`` in [0, pi], azimuth ``phi`` in [0, 2*pi)."""

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise ValueError("Bloch angles must be finite")
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta={self.theta} outside [0, pi]")
        if not 0.0 <= self.phi < 2 * math.pi:
            raise ValueError(f"phi={self.phi} outside [0, 2*pi)")

    @classmethod
    def from_degrees(cls, theta: float, phi: float = 0.0) -> "BlochDirection":
        return cls(math.radians(theta), math.radians(phi) % (2 * math.pi))

    def vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])

    def up(self) -> StateVector:
        """cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>"""
        h = self.theta / 2
        return StateVector(
            [math.cos(h), np.exp(1j * self.phi) * math.sin(h)],
            label=f"up({self.theta:.6g},{self.phi:.6g})",
        )

    def down(self) -> StateVector:
        h = self.theta / 2
        return StateVector(
            [-np.exp(-1j * self.phi) * math.sin(h), math.cos(h)],
            label=f"down({self.theta:.6g},{self.phi:.6g})",
        )


Z_AXIS = BlochDirection(0.0)
X_AXIS = BlochDirection(math.pi / 2)


def inner_product(x: StateVector, y: StateVector) -> complex:
    """<x|y>, conjugate-linear in ``x``."""
    _same_dim(x.dim, y.dim)
    return complex(np.vdot(x.amplitudes, y.amplitudes))


def apply_projector(p: Projector, x: StateVector) -> tuple[np.ndarray, float]:
    """Return the unnormalized vector P|x> and its squared norm <x|P|x>."""
    _same_dim(p.dim, x.dim)
    v = p.matrix @ x.amplitudes
    return v, float(np.vdot(v, v).real)


def born_probability(x: StateVector, p: Projector) -> float:
    """<x|P|x>, evaluated as |P x|^2 so it is never negative."""
    return apply_projector(p, x)[1]


def spin_observable(direction: BlochDirection, name: str | None = None) -> Observable:
    up, down = direction.up(), direction.down()
    return Observable(
        name or f"sigma({direction.theta:.6g},{direction.phi:.6g})",
        (
            Outcome(1.0, "up", Projector.onto(up)),
            Outcome(-1.0, "down", Projector.onto(down)),
        ),
    )


def projector_observable(p: Projector, name: str) -> Observable:
    """Yes/no observable {(1, "yes", P), (0, "no", I - P)}.

    When P is the identity the "no" branch would be the zero matrix, so the
    observable degenerates to the single certain outcome "yes".
    """
    if np.max(np.abs(p.matrix - np.eye(p.dim))) <= TOL:
        return Observable(name, (Outcome(1.0, "yes", p),))
    return Observable(name, (Outcome(1.0, "yes", p), Outcome(0.0, "no", p.complement())))


def state_projector_observable(state: StateVector, name: str = "post") -> Observable:
    """Yes/no test for a given pure state; "yes" means the state was found."""
    return projector_observable(Projector.onto(state), name)

"""Fixed-dimension state vectors, operators and Born-rule measurement.

Only one- and two-qubit systems (dimension 2 and 4) are supported.  Two-qubit
objects use control-major ordering: ``index = 2 * control + target``, which is
what :func:`numpy.kron` produces for ``kron(control, target)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence, Union

import numpy as np

TOL = 1e-12
SUPPORTED_DIMS = (2, 4)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


def _check_dim(dim: int) -> None:
    if dim not in SUPPORTED_DIMS:
        raise ValueError(f"unsupported dimension {dim}; expected one of {SUPPORTED_DIMS}")


@dataclass(frozen=True, eq=False)
class PureState:
    """A ket of dimension 2 or 4.

    States are not required to be normalized: the branch kets produced by the
    probe carry their own weights.  Set ``normalized=True`` to have the norm
    checked at construction.
    """

    amplitudes: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        amps = _frozen(np.ravel(self.amplitudes))
        _check_dim(amps.shape[0])
        if not np.all(np.isfinite(amps)):
            raise ValueError("state amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)
        if self.normalized and abs(self.norm_sq() - 1.0) > TOL:
            raise ValueError(f"state flagged normalized has norm^2 {self.norm_sq()!r}")

    @classmethod
    def ket(cls, *amplitudes: complex, normalized: bool = False) -> "PureState":
        return cls(np.array(amplitudes), normalized=normalized)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalize(self) -> "PureState":
        n = self.norm_sq()
        if n == 0.0:
            raise ValueError("cannot normalize the zero ket")
        return PureState(self.amplitudes / math.sqrt(n), normalized=True)

    def projector(self) -> "Operator":
        """Return the (unnormalized) outer product |self><self|."""
        return Operator(np.outer(self.amplitudes, self.amplitudes.conj()))

    def allclose(self, other: "PureState", tol: float = TOL) -> bool:
        return self.dim == other.dim and bool(
            np.max(np.abs(self.amplitudes - other.amplitudes)) <= tol
        )

    def __getitem__(self, idx: int) -> complex:
        return complex(self.amplitudes[idx])

    def __add__(self, other: "PureState") -> "PureState":
        if not isinstance(other, PureState):
            return NotImplemented
        _require_same_dim(self.dim, other.dim)
        return PureState(self.amplitudes + other.amplitudes)

    def __sub__(self, other: "PureState") -> "PureState":
        if not isinstance(other, PureState):
            return NotImplemented
        _require_same_dim(self.dim, other.dim)
        return PureState(self.amplitudes - other.amplitudes)

    def __mul__(self, scalar: complex) -> "PureState":
        if isinstance(scalar, (PureState, Operator)):
            return NotImplemented
        return PureState(self.amplitudes * complex(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: complex) -> "PureState":
        return PureState(self.amplitudes / complex(scalar))

    def __neg__(self) -> "PureState":
        return PureState(-self.amplitudes)

    def __repr__(self) -> str:
        return f"PureState({np.array2string(self.amplitudes, precision=6)})"


@dataclass(frozen=True, eq=False)
class Operator:
    """A dim x dim complex matrix (dim 2 or 4)."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        _check_dim(m.shape[0])
        if not np.all(np.isfinite(m)):
            raise ValueError("operator entries must be finite")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, dim: int = 2) -> "Operator":
        return cls(np.eye(dim))

    @classmethod
    def zero(cls, dim: int = 2) -> "Operator":
        return cls(np.zeros((dim, dim)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dagger(self) -> "Operator":
        return Operator(self.matrix.conj().T)

    def is_hermitian(self, tol: float = TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol)

    def is_unitary(self, tol: float = TOL) -> bool:
        prod = self.matrix @ self.matrix.conj().T
        return bool(np.max(np.abs(prod - np.eye(self.dim))) <= tol)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.matrix)))

    def allclose(self, other: "Operator", tol: float = TOL) -> bool:
        return self.dim == other.dim and bool(
            np.max(np.abs(self.matrix - other.matrix)) <= tol
        )

    def __matmul__(self, other):
        if isinstance(other, Operator):
            _require_same_dim(self.dim, other.dim)
            return Operator(self.matrix @ other.matrix)
        if isinstance(other, PureState):
            _require_same_dim(self.dim, other.dim)
            return PureState(self.matrix @ other.amplitudes)
        return NotImplemented

    def __add__(self, other: "Operator") -> "Operator":
        if not isinstance(other, Operator):
            return NotImplemented
        _require_same_dim(self.dim, other.dim)
        return Operator(self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        if not isinstance(other, Operator):
            return NotImplemented
        _require_same_dim(self.dim, other.dim)
        return Operator(self.matrix - other.matrix)

    def __mul__(self, scalar: complex) -> "Operator":
        if isinstance(scalar, (PureState, Operator)):
            return NotImplemented
        return Operator(self.matrix * complex(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: complex) -> "Operator":
        return Operator(self.matrix / complex(scalar))

    def __repr__(self) -> str:
        return f"Operator({np.array2string(self.matrix, precision=6)})"


@dataclass(frozen=True, eq=False)
class Povm:
    """Labeled single-qubit measurement effects.

    Construction only checks shapes; use :func:`validate_povm` for the
    positivity and completeness conditions.
    """

    labels: tuple
    effects: tuple

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        effects = tuple(self.effects)
        if len(labels) != len(effects) or not effects:
            raise ValueError("a POVM needs one label per effect and at least one effect")
        if len(set(labels)) != len(labels):
            raise ValueError("POVM labels must be unique")
        if any(e.dim != 2 for e in effects):
            raise ValueError("POVM effects must be single-qubit (dim 2) operators")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "effects", effects)

    def __len__(self) -> int:
        return len(self.effects)

    def __iter__(self):
        return iter(zip(self.labels, self.effects))

    def effect(self, label: Hashable) -> Operator:
        return self.effects[self.labels.index(label)]

    def replace(self, label: Hashable, effect: Operator) -> "Povm":
        idx = self.labels.index(label)
        effects = list(self.effects)
        effects[idx] = effect
        return Povm(self.labels, tuple(effects))


@dataclass(frozen=True)
class PovmReport:
    completeness_residual: float
    min_eigenvalue: float
    hermitian: bool
    tol: float = field(default=TOL)

    @property
    def passed(self) -> bool:
        return (
            self.hermitian
            and self.completeness_residual <= self.tol
            and self.min_eigenvalue >= -self.tol
        )


def _require_same_dim(a: int, b: int) -> None:
    if a != b:
        raise ValueError(f"dimension mismatch: {a} vs {b}")


def inner(a: PureState, b: PureState) -> complex:
    """<a|b>, conjugate-linear in the first argument."""
    _require_same_dim(a.dim, b.dim)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


Tensorable = Union[PureState, Operator]


def tensor(a: Tensorable, b: Tensorable) -> Tensorable:
    """Kronecker product of two single-qubit objects, control (``a``) major."""
    if a.dim != 2 or b.dim != 2:
        raise ValueError("tensor is only defined for two single-qubit (dim 2) factors")
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, Operator) and isinstance(b, Operator):
        return Operator(np.kron(a.matrix, b.matrix))
    raise TypeError("tensor needs two states or two operators")


def born_prob(state: PureState, effect: Operator) -> float:
    """Return <state|effect|state> as a probability.

    Values within ``TOL`` below zero are clamped to 0; values within ``TOL``
    above ``<state|state>`` are clamped to that weight (1 for a normalized
    state).  Anything further out means the effect is not a valid POVM element
    and raises.
    """
    _require_same_dim(state.dim, effect.dim)
    if not effect.is_hermitian():
        raise ValueError("measurement effect must be Hermitian")
    value = complex(np.vdot(state.amplitudes, effect.matrix @ state.amplitudes))
    weight = state.norm_sq()
    p = value.real
    if p < -TOL:
        raise ValueError(f"negative Born probability {p!r}: effect is not positive")
    if p > weight + TOL:
        raise ValueError(f"Born probability {p!r} exceeds state weight {weight!r}")
    return min(max(p, 0.0), weight)


def eig2(op: Operator) -> tuple[float, float]:
    """Closed-form eigenvalues of a 2x2 Hermitian operator, ascending."""
    if op.dim != 2:
        raise ValueError("eig2 needs a dim-2 operator")
    if not op.is_hermitian():
        raise ValueError("eig2 needs a Hermitian operator")
    a = float(op.matrix[0, 0].real)
    d = float(op.matrix[1, 1].real)
    b = op.matrix[0, 1]
    mean = 0.5 * (a + d)
    radius = math.hypot(0.5 * (a - d), abs(b))
    return (mean - radius, mean + radius)


def validate_povm(p: Povm, tol: float = TOL) -> PovmReport:
    total = Operator.zero(2)
    for e in p.effects:
        total = total + e
    residual = (total - Operator.identity(2)).max_abs()
    hermitian = all(e.is_hermitian(tol) for e in p.effects)
    if hermitian:
        min_eig = min(eig2(e)[0] for e in p.effects)
    else:
        min_eig = float("nan")
    return PovmReport(residual, min_eig, hermitian, tol)


def projector_povm(labels: Sequence[Hashable], kets: Sequence[PureState]) -> Povm:
    """Projective measurement from a list of kets (normalized on the fly)."""
    return Povm(tuple(labels), tuple(k.normalize().projector() for k in kets))

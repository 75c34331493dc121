"""States, gate and measurements of the CNOT entangling probe.

Every single-qubit ket is stored in the H/V polarization frame, with
``|H> = (1, 0)`` and ``|V> = (0, 1)``.  The gate's computational basis sits
at 22.5 degrees from ``|V>`` and ``|H>`` (see :func:`comp_basis`); Eve's
target-qubit states are all written in terms of ``|+>`` and ``|->`` built from
that basis.

The attack strength ``pe`` is Bob's induced sifted-bit error probability and
is the only free parameter.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .quantum import Operator, PureState, Povm, tensor

PE_MAX = 1.0 / 3.0
_SQRT2 = math.sqrt(2.0)


class ProbeDomainError(ValueError):
    """Raised when the attack strength lies outside the supported range."""


class Basis(enum.Enum):
    HV = "HV"
    DIAG = "DIAG"

    @property
    def symbols(self) -> tuple["Bb84Symbol", "Bb84Symbol"]:
        """(bit-0 symbol, bit-1 symbol) for this basis."""
        if self is Basis.HV:
            return (Bb84Symbol.H, Bb84Symbol.V)
        return (Bb84Symbol.P45, Bb84Symbol.M45)


class Bb84Symbol(enum.Enum):
    H = "H"
    V = "V"
    P45 = "P45"
    M45 = "M45"

    @property
    def basis(self) -> Basis:
        return Basis.HV if self in (Bb84Symbol.H, Bb84Symbol.V) else Basis.DIAG

    @property
    def bit(self) -> int:
        return 0 if self in (Bb84Symbol.H, Bb84Symbol.P45) else 1

    @property
    def label(self) -> str:
        return self.value

    def flipped(self) -> "Bb84Symbol":
        return self.basis.symbols[1 - self.bit]

    @classmethod
    def from_bit(cls, basis: Basis, bit: int) -> "Bb84Symbol":
        return basis.symbols[bit]


class EveOutcome(enum.Enum):
    T_PLUS = "T+"
    T_MINUS = "T-"
    INCONCLUSIVE = "inc"
    D_PLUS = "d+"
    D_MINUS = "d-"

    def decode(self, basis: Basis) -> Union[Bb84Symbol, "EveOutcome"]:
        """Map a raw outcome to Eve's symbol guess once the basis is public.

        ``T+`` (and ``d+``) means the target qubit looked like ``|T+>``, which
        accompanies a correctly received V or +45; ``T-``/``d-`` pairs with H
        or -45.  The inconclusive outcome decodes to itself.
        """
        if self is EveOutcome.INCONCLUSIVE:
            return self
        plus = self in (EveOutcome.T_PLUS, EveOutcome.D_PLUS)
        if basis is Basis.HV:
            return Bb84Symbol.V if plus else Bb84Symbol.H
        return Bb84Symbol.P45 if plus else Bb84Symbol.M45


class Probe(enum.Enum):
    PROJECTIVE = "projective"
    POVM = "povm"
    NONE = "none"


@dataclass(frozen=True)
class ProbeParams:
    pe: float

    def __post_init__(self) -> None:
        pe = float(self.pe)
        if not math.isfinite(pe) or pe < 0.0 or pe > PE_MAX:
            raise ProbeDomainError(f"pe must lie in [0, 1/3], got {self.pe!r}")
        object.__setattr__(self, "pe", pe)

    @property
    def c(self) -> float:
        return math.sqrt(1.0 - 2.0 * self.pe)

    @property
    def s(self) -> float:
        return math.sqrt(2.0 * self.pe)


def _params(p: Union[ProbeParams, float]) -> ProbeParams:
    return p if isinstance(p, ProbeParams) else ProbeParams(p)


H_KET = PureState.ket(1.0, 0.0, normalized=True)
V_KET = PureState.ket(0.0, 1.0, normalized=True)

_C8 = math.cos(math.pi / 8)
_S8 = math.sin(math.pi / 8)

_SYMBOL_KETS = {
    Bb84Symbol.H: H_KET,
    Bb84Symbol.V: V_KET,
    Bb84Symbol.P45: PureState.ket(1 / _SQRT2, 1 / _SQRT2, normalized=True),
    # phase chosen so that the gate identities hold with all-plus signs
    Bb84Symbol.M45: PureState.ket(-1 / _SQRT2, 1 / _SQRT2, normalized=True),
}


def comp_basis() -> tuple[PureState, PureState]:
    """The gate's computational basis (|0>, |1>) in the H/V frame.

    ``|0> = sin(pi/8)|H> + cos(pi/8)|V>`` and
    ``|1> = cos(pi/8)|H> - sin(pi/8)|V>``.  With this orientation a CNOT in
    {|0>, |1>} maps H and -45 onto the ``|T->`` branch and V and +45 onto the
    ``|T+>`` branch.
    """
    zero = PureState.ket(_S8, _C8, normalized=True)
    one = PureState.ket(_C8, -_S8, normalized=True)
    return zero, one


def plus_minus() -> tuple[PureState, PureState]:
    zero, one = comp_basis()
    return (zero + one) / _SQRT2, (zero - one) / _SQRT2


def bb84_state(sym: Bb84Symbol) -> PureState:
    return _SYMBOL_KETS[sym]


def probe_input(p: Union[ProbeParams, float]) -> PureState:
    p = _params(p)
    plus, minus = plus_minus()
    return PureState((p.c * plus + p.s * minus).amplitudes, normalized=True)


def target_outputs(p: Union[ProbeParams, float]) -> tuple[PureState, PureState, PureState]:
    """Unnormalized target kets (|T+>, |T->, |T_E>)."""
    p = _params(p)
    plus, minus = plus_minus()
    branch = (p.s / _SQRT2) * minus
    return p.c * plus + branch, p.c * plus - branch, branch


def perp_states(p: Union[ProbeParams, float]) -> tuple[PureState, PureState]:
    """(|T+perp>, |T-perp>), orthogonal to |T+> and |T-> respectively."""
    p = _params(p)
    plus, minus = plus_minus()
    lead = -(p.s / _SQRT2) * plus
    return lead + p.c * minus, lead - p.c * minus


@lru_cache(maxsize=1)
def cnot() -> Operator:
    zero, one = comp_basis()
    flip = Operator(np.outer(zero.amplitudes, one.amplitudes.conj()))
    flip = flip + flip.dagger()
    return tensor(zero.projector(), Operator.identity(2)) + tensor(one.projector(), flip)


def attack_branches(sym: Bb84Symbol, p: Union[ProbeParams, float]):
    """Expected gate output for input ``sym`` as two (Bob ket, Eve ket) terms.

    The first term keeps Bob's symbol intact and carries |T+> or |T->; the
    second flips it and carries |T_E>.
    """
    t_plus, t_minus, t_err = target_outputs(p)
    keep = t_minus if sym in (Bb84Symbol.H, Bb84Symbol.M45) else t_plus
    return (
        (bb84_state(sym), keep),
        (bb84_state(sym.flipped()), t_err),
    )


def joint_output(sym: Bb84Symbol, p: Union[ProbeParams, float]) -> PureState:
    """Bob (x) Eve state after the gate acts on ``sym`` and the probe input."""
    out = cnot() @ tensor(bb84_state(sym), probe_input(p))
    return PureState(out.amplitudes, normalized=True)


def projective_measurement() -> Povm:
    """Eve's minimum-error measurement {|d+><d+|, |d-><d-|} with d+ = |0>."""
    zero, one = comp_basis()
    return Povm(
        (EveOutcome.D_PLUS, EveOutcome.D_MINUS),
        (zero.projector(), one.projector()),
    )


def inconclusive_weight(p: Union[ProbeParams, float]) -> float:
    """Coefficient (C^2 - S^2/2) / C^2 of |+><+| in the inconclusive effect.

    Evaluated as (1 - 3 pe) / (1 - 2 pe), the same quantity, which is exactly
    zero at pe = 1/3 in floating point.
    """
    p = _params(p)
    return (1.0 - 3.0 * p.pe) / (1.0 - 2.0 * p.pe)


def conclusive_povm(p: Union[ProbeParams, float]) -> Povm:
    """Unambiguous-discrimination POVM (T+, T-, inconclusive).

    The inconclusive effect is kept even where it vanishes (pe = 1/3).
    """
    p = _params(p)
    t_plus_perp, t_minus_perp = perp_states(p)
    plus, _ = plus_minus()
    norm = 2.0 * p.c * p.c
    return Povm(
        (EveOutcome.T_PLUS, EveOutcome.T_MINUS, EveOutcome.INCONCLUSIVE),
        (
            t_minus_perp.projector() / norm,
            t_plus_perp.projector() / norm,
            inconclusive_weight(p) * plus.projector(),
        ),
    )


def bob_measurement(basis: Basis) -> Povm:
    syms = basis.symbols
    return Povm(syms, tuple(bb84_state(s).projector() for s in syms))


def eve_measurement(probe: Probe, p: Union[ProbeParams, float]) -> Povm:
    if probe is Probe.POVM:
        return conclusive_povm(p)
    if probe is Probe.PROJECTIVE:
        return projective_measurement()
    raise ValueError(f"probe {probe!r} has no Eve measurement")


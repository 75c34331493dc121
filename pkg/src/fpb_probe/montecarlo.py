"""Seeded Monte Carlo simulation of BB84 sessions under the entangling probe.

Per-trial randomness comes from a counter-based generator (Philox): trial
``i`` of a session with seed ``s`` always consumes the 4x64-bit block at
counter ``i`` under key ``(s, stream)``.  A session can therefore be split into
chunks and run in any order or in parallel with bit-identical results.

Each trial draws

* word 0 -> Alice's symbol (top two bits),
* word 1 -> Bob's basis (top bit),
* word 2 -> a 53-bit uniform used to sample Bob's and Eve's joint outcome by
  inverse CDF over the exact Born probabilities,
* word 3 -> a 53-bit uniform for channel delivery (no-eavesdropper baseline).
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from .analytics import (
    INC,
    JointDistribution,
    Level,
    LossyScenario,
    condition_on_conclusive,
    joint_from_model,
    lossy_scenario,
    renyi_from_joint,
    table1,
    to_bit_level,
)
from .model import (
    PE_MAX,
    Basis,
    Bb84Symbol,
    EveOutcome,
    Probe,
    ProbeParams,
    bb84_state,
    bob_measurement,
    eve_measurement,
    joint_output,
)
from .quantum import TOL, born_prob, tensor

Z_THRESHOLD = 5.0
NONE_LABEL = "none"
DEFAULT_CHUNK = 1 << 18

_SYMBOLS = tuple(Bb84Symbol)
_BASES = (Basis.HV, Basis.DIAG)
_EVE_INC = 4
_EVE_NONE = 5
_N_EVE_CELLS = 6
_EVE_CELL_LABELS = tuple(s.label for s in _SYMBOLS) + (INC, NONE_LABEL)
_U53 = 2.0 ** -53


class Scenario(enum.Enum):
    DIRECT = "direct"
    LOSSY = "lossy"


@dataclass(frozen=True)
class SimConfig:
    """Session parameters.

    In the lossy scenario ``pe`` is derived as ``eta / 3`` for the conclusive
    probe (so Eve's inconclusive rate equals the channel loss); with
    ``probe=Probe.NONE`` it is the plain pure-loss channel with delivery
    probability ``eta`` and no eavesdropper.
    """

    trials: int
    seed: int
    pe: float = 0.0
    probe: Probe = Probe.POVM
    scenario: Scenario = Scenario.DIRECT
    eta: Optional[float] = None

    def __post_init__(self) -> None:
        if isinstance(self.trials, bool) or not isinstance(self.trials, (int, np.integer)):
            raise ValueError(f"trials must be an integer, got {self.trials!r}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "seed", int(self.seed))

        if self.scenario is Scenario.DIRECT:
            if self.eta is not None:
                raise ValueError("eta only applies to the lossy scenario")
            pe = 0.0 if self.probe is Probe.NONE else ProbeParams(self.pe).pe
        else:
            if self.eta is None or not (0.0 < self.eta <= 1.0):
                raise ValueError(f"lossy scenario needs eta in (0, 1], got {self.eta!r}")
            if self.probe is Probe.PROJECTIVE:
                raise ValueError("selective forwarding needs the conclusive (povm) probe")
            pe = 0.0 if self.probe is Probe.NONE else min(self.eta / 3.0, PE_MAX)
        object.__setattr__(self, "pe", pe)

    @classmethod
    def direct(cls, pe: float, trials: int, seed: int, probe: Probe = Probe.POVM) -> "SimConfig":
        return cls(trials=trials, seed=seed, pe=pe, probe=probe)

    @classmethod
    def lossy(cls, eta: float, trials: int, seed: int, probe: Probe = Probe.POVM) -> "SimConfig":
        return cls(trials=trials, seed=seed, probe=probe, scenario=Scenario.LOSSY, eta=eta)

    @property
    def stream(self) -> int:
        # the no-eavesdropper baseline draws from its own stream
        return 1 if self.probe is Probe.NONE else 0


@dataclass(frozen=True)
class TrialRecord:
    index: int
    alice_symbol: Bb84Symbol
    alice_basis: Basis
    bob_basis: Basis
    bob_symbol: Optional[Bb84Symbol]
    eve_outcome: Optional[EveOutcome]
    eve_decoded: Union[Bb84Symbol, EveOutcome, None]
    sifted: bool
    forwarded: Optional[bool]


@dataclass(frozen=True)
class _Tables:
    cdf: np.ndarray  # (8 cases, n_outcomes); case = 2 * alice + bob_basis
    n_eve: int
    eve_labels: tuple
    decoded: np.ndarray  # (2 bases, n_eve) -> eve cell index


@lru_cache(maxsize=64)
def _tables(probe: Probe, pe: float) -> _Tables:
    if probe is Probe.NONE:
        eve = None
        eve_labels: tuple = ()
        n_eve = 1
    else:
        eve = eve_measurement(probe, ProbeParams(pe))
        eve_labels = eve.labels
        n_eve = len(eve)

    probs = np.zeros((8, 2 * n_eve))
    for a, sym in enumerate(_SYMBOLS):
        state = bb84_state(sym) if eve is None else joint_output(sym, pe)
        for bb, basis in enumerate(_BASES):
            for r, (_, bob_eff) in enumerate(bob_measurement(basis)):
                if eve is None:
                    probs[2 * a + bb, r] = born_prob(state, bob_eff)
                    continue
                for j, (_, eve_eff) in enumerate(eve):
                    probs[2 * a + bb, r * n_eve + j] = born_prob(state, tensor(bob_eff, eve_eff))

    # probabilities at round-off level are exact zeros of the model
    probs[probs <= TOL] = 0.0
    probs /= probs.sum(axis=1, keepdims=True)
    cdf = np.cumsum(probs, axis=1)
    for row, p in zip(cdf, probs):
        last = np.flatnonzero(p)[-1]
        row[last:] = 1.0

    decoded = np.full((2, n_eve), _EVE_NONE, dtype=np.int64)
    for bb, basis in enumerate(_BASES):
        for j, label in enumerate(eve_labels):
            d = label.decode(basis)
            decoded[bb, j] = _EVE_INC if d is EveOutcome.INCONCLUSIVE else _SYMBOLS.index(d)
    cdf.setflags(write=False)
    decoded.setflags(write=False)
    return _Tables(cdf, n_eve, eve_labels, decoded)


def _raw_block(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    bitgen = np.random.Philox(
        key=np.array([seed, stream], dtype=np.uint64),
        counter=np.array([start, 0, 0, 0], dtype=np.uint64),
    )
    return bitgen.random_raw(4 * count).reshape(count, 4)


@dataclass
class _Block:
    alice: np.ndarray
    bob_basis: np.ndarray
    bob_sym: np.ndarray  # -1 when Bob received nothing
    eve_raw: np.ndarray  # -1 without an eavesdropper
    eve_cell: np.ndarray  # decoded cell index, -1 when not sifted
    delivered: np.ndarray
    sifted: np.ndarray


def _simulate_block(config: SimConfig, start: int, count: int) -> _Block:
    tabs = _tables(config.probe, config.pe)
    raw = _raw_block(config.seed, config.stream, start, count)
    alice = (raw[:, 0] >> np.uint64(62)).astype(np.int64)
    bob_basis = (raw[:, 1] >> np.uint64(63)).astype(np.int64)
    u = (raw[:, 2] >> np.uint64(11)).astype(np.float64) * _U53
    u_channel = (raw[:, 3] >> np.uint64(11)).astype(np.float64) * _U53

    case = 2 * alice + bob_basis
    outcome = np.empty(count, dtype=np.int64)
    for c in range(8):
        mask = case == c
        outcome[mask] = np.searchsorted(tabs.cdf[c], u[mask], side="right")

    bob_result = outcome // tabs.n_eve
    bob_sym = 2 * bob_basis + bob_result
    alice_basis = alice // 2
    matched = alice_basis == bob_basis

    if config.probe is Probe.NONE:
        eve_raw = np.full(count, -1, dtype=np.int64)
        eve_cell_all = np.full(count, _EVE_NONE, dtype=np.int64)
    else:
        eve_raw = outcome % tabs.n_eve
        eve_cell_all = tabs.decoded[alice_basis, eve_raw]

    if config.scenario is Scenario.DIRECT:
        delivered = np.ones(count, dtype=bool)
    elif config.probe is Probe.NONE:
        delivered = u_channel < config.eta
    else:
        inc = tabs.eve_labels.index(EveOutcome.INCONCLUSIVE)
        delivered = eve_raw != inc

    sifted = matched & delivered
    bob_sym = np.where(delivered, bob_sym, -1)
    eve_cell = np.where(sifted, eve_cell_all, -1)
    return _Block(alice, bob_basis, bob_sym, eve_raw, eve_cell, delivered, sifted)


def sample_trial(trial_index: int, config: SimConfig) -> TrialRecord:
    """Simulate a single trial; identical to that trial inside a session."""
    if not (0 <= trial_index < 2**64):
        raise ValueError("trial_index must be a non-negative 64-bit integer")
    blk = _simulate_block(config, trial_index, 1)
    tabs = _tables(config.probe, config.pe)
    a = _SYMBOLS[int(blk.alice[0])]
    bob = int(blk.bob_sym[0])
    raw = int(blk.eve_raw[0])
    cell = int(blk.eve_cell[0])
    if cell < 0 or cell == _EVE_NONE:
        decoded = None
    elif cell == _EVE_INC:
        decoded = EveOutcome.INCONCLUSIVE
    else:
        decoded = _SYMBOLS[cell]
    return TrialRecord(
        index=trial_index,
        alice_symbol=a,
        alice_basis=a.basis,
        bob_basis=_BASES[int(blk.bob_basis[0])],
        bob_symbol=_SYMBOLS[bob] if bob >= 0 else None,
        eve_outcome=tabs.eve_labels[raw] if raw >= 0 else None,
        eve_decoded=decoded,
        sifted=bool(blk.sifted[0]),
        forwarded=bool(blk.delivered[0]) if config.scenario is Scenario.LOSSY else None,
    )


@dataclass
class _Tally:
    cells: np.ndarray
    matched: int = 0
    delivered: int = 0
    raw_inconclusive: int = 0

    def __add__(self, other: "_Tally") -> "_Tally":
        return _Tally(
            self.cells + other.cells,
            self.matched + other.matched,
            self.delivered + other.delivered,
            self.raw_inconclusive + other.raw_inconclusive,
        )


def _tally_block(config: SimConfig, start: int, count: int) -> _Tally:
    blk = _simulate_block(config, start, count)
    s = blk.sifted
    flat = (blk.alice[s] * 4 + blk.bob_sym[s]) * _N_EVE_CELLS + blk.eve_cell[s]
    cells = np.bincount(flat, minlength=4 * 4 * _N_EVE_CELLS).astype(np.int64)
    raw_inc = 0
    if config.probe is not Probe.NONE:
        tabs = _tables(config.probe, config.pe)
        if EveOutcome.INCONCLUSIVE in tabs.eve_labels:
            raw_inc = int(np.count_nonzero(blk.eve_raw == tabs.eve_labels.index(EveOutcome.INCONCLUSIVE)))
    return _Tally(
        cells=cells,
        matched=int(np.count_nonzero(blk.alice // 2 == blk.bob_basis)),
        delivered=int(np.count_nonzero(blk.delivered)),
        raw_inconclusive=raw_inc,
    )


def _layout(probe: Probe) -> list[tuple]:
    """Sift-level state keys that can occur for ``probe``."""
    keys = []
    for sym in _SYMBOLS:
        basis_syms = [s.label for s in sym.basis.symbols]
        if probe is Probe.NONE:
            eve_labels = [NONE_LABEL]
        elif probe is Probe.POVM:
            eve_labels = basis_syms + [INC]
        else:
            eve_labels = basis_syms
        for b in basis_syms:
            for e in eve_labels:
                keys.append((sym.label, b, e))
    return keys


@dataclass(frozen=True)
class SessionStats:
    """Aggregated tallies over sifted trials of one session."""

    config: SimConfig
    cell_counts: dict = field(repr=False)
    sift_count: int
    matched_count: int
    delivered_count: int
    error_count: int
    inconclusive_count: int
    raw_inconclusive_count: int

    @property
    def trials(self) -> int:
        return self.config.trials

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def forwarded_count(self) -> int:
        """Photons Eve sent on to Bob (lossy scenario with a probe)."""
        if self.config.scenario is Scenario.LOSSY and self.config.probe is not Probe.NONE:
            return self.delivered_count
        return 0

    @property
    def sifted_fraction(self) -> float:
        """Fraction of basis-matched trials in which Bob got a photon."""
        return self.sift_count / self.matched_count if self.matched_count else float("nan")

    @property
    def error_rate(self) -> float:
        return self.error_count / self.sift_count if self.sift_count else float("nan")

    def counts(self, level: Level = Level.STATE) -> dict:
        if level is Level.STATE:
            return dict(self.cell_counts)
        out: dict = {}
        for key, n in self.cell_counts.items():
            bkey = _bit_key(key)
            out[bkey] = out.get(bkey, 0) + n
        return out

    def distribution(self, level: Level = Level.STATE) -> JointDistribution:
        if self.sift_count == 0:
            raise ValueError("no sifted trials; empirical distribution undefined")
        n = self.sift_count
        return JointDistribution(level, {k: c / n for k, c in self.counts(level).items()})

    def standard_errors(self, level: Level = Level.STATE) -> dict:
        """Binomial standard error of each empirical cell frequency."""
        n = self.sift_count
        return {
            k: math.sqrt((c / n) * (1.0 - c / n) / n) if n else float("nan")
            for k, c in self.counts(level).items()
        }

    def renyi(self) -> float:
        return renyi_from_joint(self.distribution(Level.BIT))


def _bit_key(key: tuple) -> tuple:
    def bit(label):
        return label if label in (INC, NONE_LABEL) else Bb84Symbol(label).bit

    return tuple(bit(x) for x in key)


def run_session(
    config: SimConfig, *, workers: int = 1, chunk_size: int = DEFAULT_CHUNK
) -> SessionStats:
    """Simulate ``config.trials`` trials and aggregate the sifted statistics.

    The result does not depend on ``workers`` or ``chunk_size``.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    spans = [
        (start, min(chunk_size, config.trials - start))
        for start in range(0, config.trials, chunk_size)
    ]
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda sp: _tally_block(config, *sp), spans))
    else:
        parts = [_tally_block(config, *sp) for sp in spans]
    total = parts[0]
    for part in parts[1:]:
        total = total + part

    cells = total.cells.reshape(4, 4, _N_EVE_CELLS)
    counts = {}
    layout = _layout(config.probe)
    for key in layout:
        a, b, e = key
        counts[key] = int(cells[_label_index(a), _label_index(b), _EVE_CELL_LABELS.index(e)])
    # anything outside the layout is a sampler bug, keep it visible
    for a in range(4):
        for b in range(4):
            for e in range(_N_EVE_CELLS):
                key = (_SYMBOLS[a].label, _SYMBOLS[b].label, _EVE_CELL_LABELS[e])
                if cells[a, b, e] and key not in counts:
                    counts[key] = int(cells[a, b, e])

    sift = int(total.cells.sum())
    errors = sum(n for (a, b, _), n in counts.items() if a != b)
    inc = sum(n for (_, _, e), n in counts.items() if e == INC)
    return SessionStats(
        config=config,
        cell_counts=counts,
        sift_count=sift,
        matched_count=total.matched,
        delivered_count=total.delivered,
        error_count=errors,
        inconclusive_count=inc,
        raw_inconclusive_count=total.raw_inconclusive,
    )


def _label_index(label: str) -> int:
    return _SYMBOLS.index(Bb84Symbol(label))


@dataclass(frozen=True)
class CellComparison:
    key: tuple
    count: int
    observed: float
    expected: float
    std_error: float
    z: float


@dataclass(frozen=True)
class ComparisonReport:
    level: Level
    n: int
    cells: tuple
    max_abs_z: float
    zero_violations: tuple
    threshold: float = Z_THRESHOLD

    @property
    def passed(self) -> bool:
        return self.max_abs_z <= self.threshold and not self.zero_violations

    @property
    def familywise_alpha(self) -> float:
        """Bonferroni bound on a false failure across all non-degenerate cells."""
        tested = sum(1 for c in self.cells if c.std_error > 0)
        return min(1.0, tested * math.erfc(self.threshold / math.sqrt(2.0)))


def compare_to_analytic(
    stats: SessionStats, dist: JointDistribution, threshold: float = Z_THRESHOLD
) -> ComparisonReport:
    """Per-cell z-scores of the empirical frequencies against ``dist``.

    The binomial standard error uses the analytic cell probability.  Cells with
    analytic probability 0 must have zero counts.
    """
    counts = stats.counts(dist.level)
    missing = [k for k in dist.keys() if k not in counts]
    if missing:
        raise ValueError(
            f"distribution cells {missing[:3]} are not in the session layout "
            "(level or probe mismatch)"
        )
    n = stats.sift_count
    if n == 0:
        raise ValueError("no sifted trials to compare")
    rows = []
    zero_violations = []
    for key, count in counts.items():
        p = dist[key]
        observed = count / n
        se = math.sqrt(p * (1.0 - p) / n)
        if se > 0.0:
            z = (observed - p) / se
        else:
            z = 0.0 if observed == p else math.inf
            if count and p == 0.0:
                zero_violations.append(key)
        rows.append(CellComparison(key, count, observed, p, se, z))
    max_z = max(abs(r.z) for r in rows)
    return ComparisonReport(dist.level, n, tuple(rows), max_z, tuple(zero_violations), threshold)


@dataclass(frozen=True)
class LossyRun:
    """Selective-forwarding attack run next to the plain lossy channel."""

    analytic: LossyScenario
    attack: SessionStats
    baseline: SessionStats

    @property
    def forwarded_fraction(self) -> float:
        return self.attack.sifted_fraction

    @property
    def baseline_fraction(self) -> float:
        return self.baseline.sifted_fraction

    @property
    def z_forwarded_vs_eta(self) -> float:
        eta = self.analytic.eta
        se = math.sqrt(eta * (1.0 - eta) / self.attack.matched_count)
        return _z(self.forwarded_fraction - eta, se)

    @property
    def z_forwarded_vs_baseline(self) -> float:
        p1, n1 = self.forwarded_fraction, self.attack.matched_count
        p2, n2 = self.baseline_fraction, self.baseline.matched_count
        se = math.sqrt(p1 * (1.0 - p1) / n1 + p2 * (1.0 - p2) / n2)
        return _z(p1 - p2, se)

    @property
    def conditional_error(self) -> float:
        return self.attack.error_rate

    @property
    def z_conditional_error(self) -> float:
        p = self.analytic.error_given_conclusive
        se = math.sqrt(p * (1.0 - p) / self.attack.sift_count)
        return _z(self.conditional_error - p, se)

    @property
    def conditional_renyi(self) -> float:
        return self.attack.renyi()

    def comparison(self) -> ComparisonReport:
        expected = condition_on_conclusive(table1(self.analytic.pe))
        return compare_to_analytic(self.attack, expected)

    @property
    def passed(self) -> bool:
        return (
            abs(self.z_forwarded_vs_eta) <= Z_THRESHOLD
            and abs(self.z_forwarded_vs_baseline) <= Z_THRESHOLD
            and abs(self.z_conditional_error) <= Z_THRESHOLD
            and self.comparison().passed
        )


def _z(diff: float, se: float) -> float:
    if se > 0.0:
        return diff / se
    return 0.0 if diff == 0.0 else math.inf


def run_lossy(eta: float, trials: int, seed: int, *, workers: int = 1) -> LossyRun:
    analytic = lossy_scenario(eta)
    attack = run_session(SimConfig.lossy(eta, trials, seed), workers=workers)
    baseline = run_session(SimConfig.lossy(eta, trials, seed, probe=Probe.NONE), workers=workers)
    return LossyRun(analytic, attack, baseline)


def expected_distribution(config: SimConfig, level: Level = Level.STATE) -> JointDistribution:
    """Analytic counterpart of a session's empirical distribution."""
    if config.probe is Probe.NONE:
        raise ValueError("no analytic table for the no-eavesdropper run")
    if config.probe is Probe.POVM:
        dist = table1(config.pe)
    else:
        dist = joint_from_model(config.pe, config.probe)
    if config.scenario is Scenario.LOSSY:
        dist = condition_on_conclusive(dist)
    return to_bit_level(dist) if level is Level.BIT else dist

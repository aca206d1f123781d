"""ABL conditional probabilities for pre- and post-selected systems.

For a system prepared in ``|a>`` and later found in ``|b>``, the probability
that an intervening measurement of Q gave outcome k is

    |<b|P_k|a>|^2 / sum_j |<b|P_j|a>|^2

with ``P_k`` the (possibly degenerate) projector of outcome k. A sequence
of intervening measurements d_1..d_n uses the ordered product
``P_dn ... P_d1`` in place of ``P_k``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Hashable, Iterator

import numpy as np

from .quantum import TOL, Observable, StateVector, _same_dim

ZERO_DENOMINATOR = 1e-24
MAX_SEQUENCE_LENGTH = 6
MAX_SEQUENCE_OUTCOMES = 4096


class ZeroDenominator(ArithmeticError):
    """The conditioning event (pre AND post with the measurement done) has probability zero."""


@dataclass(frozen=True)
class PrePostContext:
    pre: StateVector
    post: StateVector
    time_labels: tuple[str, str] | None = None

    def __post_init__(self):
        _same_dim(self.pre.dim, self.post.dim)

    @property
    def dim(self) -> int:
        return self.pre.dim


@dataclass(frozen=True)
class MeasurementSequence:
    observables: tuple[Observable, ...] = ()

    def __post_init__(self):
        obs = tuple(self.observables)
        object.__setattr__(self, "observables", obs)
        if len(obs) > MAX_SEQUENCE_LENGTH:
            raise ValueError(f"sequence length {len(obs)} exceeds {MAX_SEQUENCE_LENGTH}")
        for o in obs[1:]:
            _same_dim(obs[0].dim, o.dim)
        n_paths = int(np.prod([len(o.outcomes) for o in obs])) if obs else 1
        if n_paths > MAX_SEQUENCE_OUTCOMES:
            raise ValueError(f"sequence has {n_paths} outcome sequences, limit is {MAX_SEQUENCE_OUTCOMES}")

    def __len__(self):
        return len(self.observables)

    def __iter__(self):
        return iter(self.observables)

    def paths(self) -> Iterator[tuple[str, ...]]:
        """All outcome-label sequences in declaration order (first observable slowest)."""
        return itertools.product(*(o.labels for o in self.observables))


@dataclass(frozen=True)
class OutcomeDistribution:
    entries: tuple[tuple[Hashable, float], ...]
    normalized: bool = True

    def __post_init__(self):
        entries = tuple((k, float(p)) for k, p in self.entries)
        object.__setattr__(self, "entries", entries)
        for k, p in entries:
            if not -TOL <= p <= 1 + TOL:
                raise ValueError(f"probability for {k!r} out of range: {p}")
        if self.normalized and abs(self.total() - 1.0) > TOL:
            raise ValueError(f"distribution flagged normalized but sums to {self.total()!r}")

    def __getitem__(self, key):
        for k, p in self.entries:
            if k == key:
                return p
        raise KeyError(key)

    def keys(self):
        return [k for k, _ in self.entries]

    def values(self):
        return [p for _, p in self.entries]

    def items(self):
        return list(self.entries)

    def total(self) -> float:
        return float(sum(p for _, p in self.entries))

    def as_dict(self) -> dict:
        return dict(self.entries)


def _transition_amplitudes(ctx: PrePostContext, q: Observable) -> np.ndarray:
    _same_dim(ctx.dim, q.dim)
    a, b = ctx.pre.amplitudes, ctx.post.amplitudes
    return np.array([np.vdot(b, o.projector.matrix @ a) for o in q.outcomes])


def _normalize(weights: np.ndarray, what: str) -> np.ndarray:
    total = float(weights.sum())
    if total < ZERO_DENOMINATOR:
        raise ZeroDenominator(
            f"post-selection unreachable given this measurement ({what}): "
            f"sum of squared transition amplitudes is {total:.3e}"
        )
    return weights / total


def abl_distribution(ctx: PrePostContext, q: Observable) -> OutcomeDistribution:
    joint = np.abs(_transition_amplitudes(ctx, q)) ** 2
    probs = _normalize(joint, q.name)
    return OutcomeDistribution(tuple(zip(q.labels, probs.tolist())))


def abl_probability(ctx: PrePostContext, q: Observable, k: str) -> float:
    q.outcome(k)
    return abl_distribution(ctx, q)[k]


def sequence_amplitudes(ctx: PrePostContext, seq: MeasurementSequence) -> dict[tuple[str, ...], complex]:
    """<b|P_dn ... P_d1|a> for every outcome path, by explicit enumeration."""
    for o in seq:
        _same_dim(ctx.dim, o.dim)
    amps = {}
    b = ctx.post.amplitudes
    for path in seq.paths():
        v = ctx.pre.amplitudes
        for obs, label in zip(seq.observables, path):
            v = obs.projector(label).matrix @ v
        amps[path] = complex(np.vdot(b, v))
    return amps


def abl_sequence_distribution(ctx: PrePostContext, seq: MeasurementSequence) -> OutcomeDistribution:
    amps = sequence_amplitudes(ctx, seq)
    joint = np.abs(np.array(list(amps.values()))) ** 2
    probs = _normalize(joint, " -> ".join(o.name for o in seq) or "no measurement")
    return OutcomeDistribution(tuple(zip(amps.keys(), probs.tolist())))


def time_reverse(ctx: PrePostContext) -> PrePostContext:
    labels = None if ctx.time_labels is None else (ctx.time_labels[1], ctx.time_labels[0])
    return PrePostContext(ctx.post, ctx.pre, labels)


def is_eigenvector(state: StateVector, q: Observable) -> str | None:
    """Label of the outcome whose projector leaves ``state`` unchanged, if any."""
    v = state.amplitudes
    for o in q.outcomes:
        if np.max(np.abs(o.projector.matrix @ v - v)) <= 1e-10:
            return o.label
    return None


def is_special_case(ctx: PrePostContext, q: Observable) -> bool:
    """True when the pre- or post-selection state is an eigenvector of some projector of ``q``."""
    _same_dim(ctx.dim, q.dim)
    return is_eigenvector(ctx.pre, q) is not None or is_eigenvector(ctx.post, q) is not None


def _commute(q: Observable, r: Observable) -> bool:
    return all(
        np.max(np.abs(x.projector.matrix @ y.projector.matrix - y.projector.matrix @ x.projector.matrix)) <= 1e-10
        for x in q.outcomes for y in r.outcomes
    )


def classify_special_case(
    ctx: PrePostContext,
    q: Observable,
    pre_observable: Observable | None = None,
    post_observable: Observable | None = None,
) -> str:
    """``"special"``, ``"generic"`` or ``"unclassified"``.

    Only the eigenvector test is trusted as establishing validity. When the
    (possibly degenerate) observables that did the pre- or post-selection
    are supplied and ``q`` commutes with one of them without the
    eigenvector test passing, the case is reported as ``"unclassified"``.
    That can only happen for dim > 2.
    """
    if is_special_case(ctx, q):
        return "special"
    if ctx.dim > 2 and any(r is not None and _commute(q, r) for r in (pre_observable, post_observable)):
        return "unclassified"
    return "generic"


def born_distribution(state: StateVector, q: Observable) -> OutcomeDistribution:
    """Forward (pre-selection only) outcome probabilities."""
    _same_dim(state.dim, q.dim)
    v = state.amplitudes
    probs = [float(np.linalg.norm(o.projector.matrix @ v)) ** 2 for o in q.outcomes]
    probs = [min(p, 1.0) for p in probs]
    return OutcomeDistribution(tuple(zip(q.labels, probs)))

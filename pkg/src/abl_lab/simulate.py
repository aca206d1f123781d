"""Seeded Monte Carlo of prepare -> intervening measurements -> final measurement.

Each trial starts in the pre-selection state, samples every intervening
observable with its Born probabilities (cumulative inversion of one uniform
draw, outcomes in declaration order), collapses by the chosen projector and
renormalizes, and finally samples the caller's final observable. Trials are
grouped into chunks of ``CHUNK_SIZE``; chunk ``c`` draws from its own
xoshiro256** stream seeded as described in :mod:`abl_lab.rng`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator

import numba as nb
import numpy as np

from . import rng
from .abl import (
    MeasurementSequence,
    PrePostContext,
    abl_sequence_distribution,
    sequence_amplitudes,
    ZeroDenominator,
)
from .quantum import Observable, _same_dim

CHUNK_SIZE = 65536
MAX_TRIALS = 10**8
LOW_COUNT = 30
JOINT_SEPARATOR = "→"
CUMULATIVE_TOL = 1e-9


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrialRecord:
    intermediate_outcomes: tuple[str, ...]
    post_outcome: str


@dataclass
class SimulationReport:
    trials: int
    seed: int
    subensemble_counts: dict[str, int]
    joint_counts: dict[tuple[str, ...], int]
    chunk_size: int = CHUNK_SIZE
    # label of the final outcome that corresponds to the post-selection state
    post_label: str | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "chunk_size": self.chunk_size,
            "subensemble_counts": dict(self.subensemble_counts),
            "joint_counts": {JOINT_SEPARATOR.join(k): v for k, v in self.joint_counts.items()},
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict, post_label: str | None = None) -> "SimulationReport":
        return cls(
            trials=int(d["trials"]),
            seed=int(d["seed"]),
            chunk_size=int(d["chunk_size"]),
            subensemble_counts={k: int(v) for k, v in d["subensemble_counts"].items()},
            joint_counts={tuple(k.split(JOINT_SEPARATOR)): int(v) for k, v in d["joint_counts"].items()},
            post_label=post_label,
        )


# --- jitted kernel -------------------------------------------------------

_U = nb.uint64


@nb.njit(cache=True)
def _rotl(x, k):
    return (x << _U(k)) | (x >> _U(64 - k))


@nb.njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> _U(30))) * _U(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U(27))) * _U(0x94D049BB133111EB)
    return z ^ (z >> _U(31))


@nb.njit(cache=True)
def _seed_state(child, s):
    sm = child
    for i in range(4):
        sm = sm + _U(0x9E3779B97F4A7C15)
        s[i] = _mix64(sm)


@nb.njit(cache=True)
def _next_double(s):
    result = _rotl(s[1] * _U(5), 7) * _U(9)
    t = s[1] << _U(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return float(result >> _U(11)) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def _branch(p, psi, out):
    """out = p @ psi; returns |out|^2."""
    dim = psi.shape[0]
    norm2 = 0.0
    for i in range(dim):
        acc = 0j
        for l in range(dim):
            acc += p[i, l] * psi[l]
        out[i] = acc
        norm2 += acc.real * acc.real + acc.imag * acc.imag
    return norm2


@nb.njit(cache=True)
def _run_kernel(pre, projs, n_out, n_trials, seed, chunk_size, counts):
    """Returns 0 on success, or 1 + observable index whose probabilities failed to sum to 1."""
    dim = pre.shape[0]
    n_obs = n_out.shape[0]
    max_k = projs.shape[1]
    s = np.zeros(4, dtype=np.uint64)
    psi = np.empty(dim, dtype=np.complex128)
    probs = np.empty(max_k, dtype=np.float64)
    v = np.empty(dim, dtype=np.complex128)
    n_chunks = (n_trials + chunk_size - 1) // chunk_size
    for c in range(n_chunks):
        child = _mix64(seed + _U(c + 1) * _U(0x9E3779B97F4A7C15))
        _seed_state(child, s)
        start = c * chunk_size
        stop = min(start + chunk_size, n_trials)
        for _ in range(start, stop):
            psi[:] = pre
            idx = 0
            for j in range(n_obs):
                u = _next_double(s)
                total = 0.0
                for k in range(n_out[j]):
                    probs[k] = _branch(projs[j, k], psi, v)
                    total += probs[k]
                if abs(total - 1.0) > 1e-9:
                    return 1 + j
                chosen = -1
                cum = 0.0
                for k in range(n_out[j]):
                    cum += probs[k]
                    if u < cum:
                        chosen = k
                        break
                if chosen < 0:
                    # u landed in the rounding gap above the cumulative sum
                    for k in range(n_out[j]):
                        if probs[k] > 0.0:
                            chosen = k
                _branch(projs[j, chosen], psi, v)
                norm = math.sqrt(probs[chosen])
                for i in range(dim):
                    psi[i] = v[i] / norm
                idx = idx * n_out[j] + chosen
            counts[idx] += 1
    return 0


# --- public API ----------------------------------------------------------

def _post_label(ctx: PrePostContext, final_obs: Observable) -> str:
    b = ctx.post.amplitudes
    for o in final_obs.outcomes:
        if np.vdot(b, o.projector.matrix @ b).real >= 1 - 1e-9:
            return o.label
    raise ValueError(
        f"final observable {final_obs.name!r} has no outcome that contains the post-selection state"
    )


def _stack(observables: list[Observable]) -> tuple[np.ndarray, np.ndarray]:
    dim = observables[0].dim
    max_k = max(len(o.outcomes) for o in observables)
    projs = np.zeros((len(observables), max_k, dim, dim), dtype=np.complex128)
    for j, o in enumerate(observables):
        for k, out in enumerate(o.outcomes):
            projs[j, k] = out.projector.matrix
    return projs, np.array([len(o.outcomes) for o in observables], dtype=np.int64)


def _check_run(ctx, seq, final_obs, n):
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise TypeError(f"trial count must be an integer, got {n!r}")
    if n < 1:
        raise ValueError(f"trial count must be >= 1, got {n}")
    if n > MAX_TRIALS:
        raise ValueError(f"trial count {n} exceeds the cap of {MAX_TRIALS}")
    for o in (*seq, final_obs):
        _same_dim(ctx.dim, o.dim)


def run_trials(
    ctx: PrePostContext,
    seq: MeasurementSequence,
    final_obs: Observable,
    n: int,
    seed: int,
    *,
    chunk_size: int = CHUNK_SIZE,
) -> SimulationReport:
    _check_run(ctx, seq, final_obs, n)
    seed = rng.check_seed(seed)
    post_label = _post_label(ctx, final_obs)
    observables = [*seq, final_obs]
    projs, n_out = _stack(observables)
    counts = np.zeros(int(np.prod(n_out)), dtype=np.int64)
    status = _run_kernel(
        ctx.pre.amplitudes.copy(), projs, n_out, int(n), np.uint64(seed), int(chunk_size), counts
    )
    if status:
        raise SimulationError(
            f"outcome probabilities of {observables[status - 1].name!r} do not sum to 1"
        )
    return _report(seq, final_obs, counts, int(n), seed, chunk_size, post_label)


def _report(seq, final_obs, counts, n, seed, chunk_size, post_label) -> SimulationReport:
    joint = {}
    for i, path in enumerate(_all_paths(seq, final_obs)):
        joint[path] = int(counts[i])
    sub = {label: 0 for label in final_obs.labels}
    for path, c in joint.items():
        sub[path[-1]] += c
    return SimulationReport(n, seed, sub, joint, chunk_size, post_label)


def _all_paths(seq: MeasurementSequence, final_obs: Observable) -> Iterator[tuple[str, ...]]:
    for path in seq.paths():
        for label in final_obs.labels:
            yield (*path, label)


def iter_trials(
    ctx: PrePostContext,
    seq: MeasurementSequence,
    final_obs: Observable,
    n: int,
    seed: int,
    *,
    chunk_size: int = CHUNK_SIZE,
) -> Iterator[TrialRecord]:
    """Pure-Python version of the trial loop, one record per trial.

    Slow; meant for inspection and for checking the jitted kernel.
    """
    _check_run(ctx, seq, final_obs, n)
    seed = rng.check_seed(seed)
    observables = [*seq, final_obs]
    for start in range(0, n, chunk_size):
        gen = rng.Xoshiro256ss(rng.chunk_seed(seed, start // chunk_size))
        for _ in range(start, min(start + chunk_size, n)):
            psi = ctx.pre.amplitudes
            labels = []
            for obs in observables:
                u = gen.random()
                branches = [(o.label, o.projector.matrix @ psi) for o in obs.outcomes]
                probs = [float(np.vdot(v, v).real) for _, v in branches]
                if abs(sum(probs) - 1.0) > CUMULATIVE_TOL:
                    raise SimulationError(f"outcome probabilities of {obs.name!r} do not sum to 1")
                chosen = None
                cum = 0.0
                for i, p in enumerate(probs):
                    cum += p
                    if u < cum:
                        chosen = i
                        break
                if chosen is None:
                    chosen = max(i for i, p in enumerate(probs) if p > 0.0)
                label, v = branches[chosen]
                psi = v / math.sqrt(probs[chosen])
                labels.append(label)
            yield TrialRecord(tuple(labels[:-1]), labels[-1])


def postselection_survival(ctx: PrePostContext, seq: MeasurementSequence) -> float:
    """Exact probability of finding the post-selection state after ``seq`` is performed."""
    amps = sequence_amplitudes(ctx, seq)
    return float(sum(abs(a) ** 2 for a in amps.values()))


@dataclass(frozen=True)
class ComparisonRow:
    outcomes: tuple[str, ...]
    count: int
    subensemble: int
    frequency: float
    abl: float
    stderr: float
    z: float
    flag: str = ""


def frequency_vs_abl(
    report: SimulationReport,
    ctx: PrePostContext,
    seq: MeasurementSequence,
    post_label: str | None = None,
) -> list[ComparisonRow]:
    """Empirical frequencies within the post-selected subensemble against exact ABL values.

    The binomial standard error uses the exact ABL probability. Rows whose
    subensemble is empty or smaller than ``LOW_COUNT`` are flagged rather
    than raising.
    """
    post_label = post_label or report.post_label
    if post_label is None:
        raise ValueError("post_label is unknown; pass it explicitly")
    try:
        exact = abl_sequence_distribution(ctx, seq).as_dict()
    except ZeroDenominator:
        exact = None
    n_sub = report.subensemble_counts.get(post_label, 0)
    rows = []
    for path in seq.paths():
        count = report.joint_counts.get((*path, post_label), 0)
        p = math.nan if exact is None else exact[path]
        if n_sub == 0:
            rows.append(ComparisonRow(path, count, 0, math.nan, p, math.nan, math.nan, "empty"))
            continue
        freq = count / n_sub
        if exact is None:
            rows.append(ComparisonRow(path, count, n_sub, freq, p, math.nan, math.nan, "unreachable"))
            continue
        se = math.sqrt(max(p * (1 - p), 0.0) / n_sub)
        if se > 0:
            z = (freq - p) / se
        else:
            z = 0.0 if abs(freq - p) <= 1e-12 else math.inf
        flag = "low-count" if n_sub < LOW_COUNT else ""
        rows.append(ComparisonRow(path, count, n_sub, freq, p, se, z, flag))
    return rows

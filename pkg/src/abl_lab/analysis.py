"""Counterfactual use of ABL probabilities, and where it goes wrong.

The central calculation: prepare spin-up along ``a``, post-select on the
outcomes of ``sigma_b``, and ask each post-selected subensemble for the ABL
probability of ``c``-up *as if* ``sigma_c`` had been measured in between.
Weighting by the subensemble sizes gives a "counterfactual total" for
``c``-up. Standard quantum mechanics, with nothing measured in between,
predicts ``|<c_up|a_up>|^2``. The two agree only in special cases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .abl import (
    ZERO_DENOMINATOR,
    OutcomeDistribution,
    PrePostContext,
    ZeroDenominator,
    abl_distribution,
    born_distribution,
    is_special_case,
)
from .quantum import (
    TOL,
    BlochDirection,
    Observable,
    Projector,
    StateVector,
    Z_AXIS,
    _same_dim,
    projector_observable,
    spin_observable,
    state_projector_observable,
)

QM_MODE = "actual-world counterfactual"
ABL_MODE = "possible-world conditional"


@dataclass(frozen=True)
class SubensembleReport:
    post_outcome: str
    weight: float
    abl_conditional: OutcomeDistribution | None  # None when the subensemble is skipped

    def to_dict(self) -> dict:
        return {
            "post_outcome": self.post_outcome,
            "weight": self.weight,
            "abl_conditional": None if self.abl_conditional is None else self.abl_conditional.as_dict(),
        }


@dataclass(frozen=True)
class DiscrepancyResult:
    counterfactual_total: float
    qm_prediction: float
    special_case: bool
    outcome: str = "up"
    subensembles: tuple[SubensembleReport, ...] = ()
    skipped: tuple[str, ...] = ()

    @property
    def discrepancy(self) -> float:
        return self.counterfactual_total - self.qm_prediction

    @property
    def modes(self) -> dict[str, str]:
        return {"qm_prediction": QM_MODE, "counterfactual_total": ABL_MODE}

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "counterfactual_total": self.counterfactual_total,
            "qm_prediction": self.qm_prediction,
            "discrepancy": self.discrepancy,
            "special_case": self.special_case,
            "modes": self.modes,
            "subensembles": [s.to_dict() for s in self.subensembles],
            "skipped": list(self.skipped),
        }


def _rank_one_state(p: Projector) -> StateVector | None:
    if p.rank != 1:
        return None
    m = p.matrix
    col = m[:, int(np.argmax(np.linalg.norm(m, axis=0)))]
    return StateVector.normalized(col)


def _subspace_abl(pre: StateVector, post: Projector, q: Observable) -> OutcomeDistribution:
    # ABL with post-selection onto a subspace; reduces to the state form for rank 1
    a = pre.amplitudes
    joint = np.array([np.linalg.norm(post.matrix @ (o.projector.matrix @ a)) ** 2 for o in q.outcomes])
    total = joint.sum()
    if total < ZERO_DENOMINATOR:
        raise ZeroDenominator("post-selection unreachable given this measurement")
    return OutcomeDistribution(tuple(zip(q.labels, (joint / total).tolist())))


def counterfactual_discrepancy(
    pre: StateVector, post_obs: Observable, q: Observable, k: str
) -> DiscrepancyResult:
    """Weighted sum over post-selection subensembles of P_ABL(k | pre, b_i), against the Born value.

    Subensembles of weight below 1e-24 contribute nothing and are listed in
    ``skipped``.
    """
    _same_dim(pre.dim, post_obs.dim)
    _same_dim(pre.dim, q.dim)
    q.outcome(k)
    subs = []
    skipped = []
    total = 0.0
    special = False
    for out in post_obs.outcomes:
        v = out.projector.matrix @ pre.amplitudes
        w = float(np.vdot(v, v).real)
        b_i = _rank_one_state(out.projector)
        if b_i is not None and is_special_case(PrePostContext(pre, b_i), q):
            special = True
        if w < ZERO_DENOMINATOR:
            skipped.append(out.label)
            subs.append(SubensembleReport(out.label, w, None))
            continue
        if b_i is not None:
            dist = abl_distribution(PrePostContext(pre, b_i), q)
        else:
            dist = _subspace_abl(pre, out.projector, q)
        subs.append(SubensembleReport(out.label, w, dist))
        total += w * dist[k]
    qm = born_distribution(pre, q)[k]
    return DiscrepancyResult(total, qm, special, k, tuple(subs), tuple(skipped))


def sharp_shanks(a_dir: BlochDirection, b_dir: BlochDirection, c_dir: BlochDirection) -> DiscrepancyResult:
    """Counterfactual total for c-up with pre-selection a-up and post-selection on sigma_b."""
    return counterfactual_discrepancy(a_dir.up(), spin_observable(b_dir), spin_observable(c_dir), "up")


# --- scan ----------------------------------------------------------------

@dataclass(frozen=True)
class ScanCell:
    b: BlochDirection
    c: BlochDirection
    result: DiscrepancyResult


@dataclass(frozen=True)
class ScanResult:
    steps: int
    cells: tuple[ScanCell, ...]
    full_sphere: bool = False

    @property
    def argmax(self) -> ScanCell:
        return max(self.cells, key=lambda cell: abs(cell.result.discrepancy))

    @property
    def max_abs_discrepancy(self) -> float:
        return abs(self.argmax.result.discrepancy)

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)


def scan_angles(steps: int) -> list[float]:
    """Polar angles k*pi/steps for k = 0..steps-1."""
    return [k * math.pi / steps for k in range(steps)]


def discrepancy_scan(grid_steps: int, full_sphere: bool = False) -> ScanResult:
    """Discrepancy over a grid of (b, c) directions with ``a`` pinned to +z.

    The default grid keeps b and c in the x-z half plane (phi = 0) with polar
    angles ``k*pi/grid_steps``. ``full_sphere`` adds azimuths
    ``2*pi*m/grid_steps`` for both directions, which is steps**4 cells, so it
    is limited to 16 steps. Cells are ordered b-major, then c.
    """
    if isinstance(grid_steps, bool) or not isinstance(grid_steps, int):
        raise TypeError("grid_steps must be an integer")
    if not 2 <= grid_steps <= 64:
        raise ValueError(f"grid_steps must be in [2, 64], got {grid_steps}")
    thetas = scan_angles(grid_steps)
    if full_sphere:
        if grid_steps > 16:
            raise ValueError("full-sphere scans are limited to 16 steps")
        phis = [2 * math.pi * m / grid_steps for m in range(grid_steps)]
        dirs = [BlochDirection(t, p) for t in thetas for p in phis]
    else:
        dirs = [BlochDirection(t) for t in thetas]
    a_up = Z_AXIS.up()
    spins = [spin_observable(d) for d in dirs]
    cells = []
    for b, sb in zip(dirs, spins):
        for c, sc in zip(dirs, spins):
            cells.append(ScanCell(b, c, counterfactual_discrepancy(a_up, sb, sc, "up")))
    return ScanResult(grid_steps, tuple(cells), full_sphere)


# --- cotenability --------------------------------------------------------

@dataclass(frozen=True)
class CotenabilityVerdict:
    holds: bool
    witness: str | None = None

    def to_dict(self) -> dict:
        return {"holds": self.holds, "witness": self.witness}


def cotenability(ctx: PrePostContext, q: Observable) -> CotenabilityVerdict:
    """Would measuring ``q`` still be certain to end in the actual post-selection state?

    Holds iff every outcome reachable from the pre-selection state collapses
    it onto a state that yields the post-selection state with certainty.
    The first outcome that fails is returned as the witness.
    """
    _same_dim(ctx.dim, q.dim)
    a, b = ctx.pre.amplitudes, ctx.post.amplitudes
    for o in q.outcomes:
        v = o.projector.matrix @ a
        w = float(np.vdot(v, v).real)
        if w <= ZERO_DENOMINATOR:
            continue
        if abs(np.vdot(b, v)) ** 2 / w < 1 - TOL:
            return CotenabilityVerdict(False, o.label)
    return CotenabilityVerdict(True)


def context_discrepancy(ctx: PrePostContext, q: Observable, k: str) -> DiscrepancyResult:
    """Counterfactual total for outcome ``k`` when post-selection is the yes/no test for ``ctx.post``."""
    return counterfactual_discrepancy(ctx.pre, state_projector_observable(ctx.post), q, k)


# --- possible worlds -----------------------------------------------------

@dataclass(frozen=True)
class World:
    outcome: str
    forward_weight: float  # P(q | a)
    post_conditional: float | None  # P(b | q), standard quantum conditional
    joint: float  # P(q, b | a)
    abl_conditional: float | None  # P_ABL(q | a, b)
    fixed_outcome_conditional: float = 1.0

    @property
    def disagrees(self) -> bool:
        """True where the unity conditional departs from the standard one."""
        return self.post_conditional is not None and abs(self.post_conditional - 1.0) > TOL

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "forward_weight": self.forward_weight,
            "post_conditional": self.post_conditional,
            "joint": self.joint,
            "abl_conditional": self.abl_conditional,
            "fixed_outcome_conditional": self.fixed_outcome_conditional,
            "disagrees": self.disagrees,
        }


@dataclass(frozen=True)
class WorldSet:
    observable: Observable
    worlds: tuple[World, ...]

    @property
    def defined(self) -> bool:
        return all(w.abl_conditional is not None for w in self.worlds)

    def to_dict(self) -> dict:
        return {
            "observable": self.observable.name,
            "defined": self.defined,
            "worlds": [w.to_dict() for w in self.worlds],
        }


def build_world_sets(ctx: PrePostContext, observables: list[Observable]) -> list[WorldSet]:
    """One set of worlds per observable, one world per outcome.

    Each world carries the forward weight, the standard conditional for
    reaching the post-selection state, their product, the ABL conditional
    and the constant unity conditional. When an outcome cannot occur the
    standard conditional is taken from the collapsed state if the projector
    has rank 1, and left undefined otherwise. A set whose joint column sums
    below 1e-24 keeps its worlds with the ABL column undefined.
    """
    a, b = ctx.pre.amplitudes, ctx.post.amplitudes
    sets = []
    for q in observables:
        _same_dim(ctx.dim, q.dim)
        rows = []
        for o in q.outcomes:
            p = o.projector.matrix
            v = p @ a
            fwd = float(np.vdot(v, v).real)
            joint = float(abs(np.vdot(b, v)) ** 2)
            if fwd > ZERO_DENOMINATOR:
                cond = joint / fwd
            elif o.projector.rank == 1:
                cond = float(np.vdot(b, p @ b).real)
            else:
                cond = None
            rows.append([o.label, fwd, cond, joint])
        total = sum(r[3] for r in rows)
        worlds = tuple(
            World(label, fwd, cond, joint, joint / total if total >= ZERO_DENOMINATOR else None)
            for label, fwd, cond, joint in rows
        )
        sets.append(WorldSet(q, worlds))
    return sets


# --- three boxes ---------------------------------------------------------

@dataclass(frozen=True)
class BoxReport:
    box: int
    abl: OutcomeDistribution
    forward: OutcomeDistribution
    cotenability: CotenabilityVerdict

    def to_dict(self) -> dict:
        return {
            "box": self.box,
            "abl": self.abl.as_dict(),
            "forward": self.forward.as_dict(),
            "cotenability": self.cotenability.to_dict(),
        }


@dataclass(frozen=True)
class ThreeBoxReport:
    ctx: PrePostContext
    boxes: tuple[BoxReport, ...] = field(default=())

    def box(self, i: int) -> BoxReport:
        return self.boxes[i - 1]

    def to_dict(self) -> dict:
        return {
            "pre": [[z.real, z.imag] for z in self.ctx.pre.amplitudes.tolist()],
            "post": [[z.real, z.imag] for z in self.ctx.post.amplitudes.tolist()],
            "boxes": [b.to_dict() for b in self.boxes],
        }


def three_box_context() -> PrePostContext:
    return PrePostContext(
        StateVector.normalized([1, 1, 1], label="(1,1,1)/sqrt3"),
        StateVector.normalized([1, 1, -1], label="(1,1,-1)/sqrt3"),
    )


def box_observable(i: int, dim: int = 3) -> Observable:
    return projector_observable(Projector.onto_basis(dim, [i - 1]), f"box{i}")


def three_box() -> ThreeBoxReport:
    """Particle in three boxes, pre (1,1,1)/sqrt3, post (1,1,-1)/sqrt3.

    Opening box 1 alone finds the particle with ABL certainty, and so does
    opening box 2 alone. Box 3 is included for contrast.
    """
    ctx = three_box_context()
    boxes = []
    for i in (1, 2, 3):
        q = box_observable(i)
        boxes.append(BoxReport(i, abl_distribution(ctx, q), born_distribution(ctx.pre, q), cotenability(ctx, q)))
    return ThreeBoxReport(ctx, tuple(boxes))

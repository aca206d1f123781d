"""Pre- and post-selected quantum probabilities (ABL rule) and their counterfactual use."""

__version__ = "0.1.0"

from .quantum import (
    BlochDirection,
    DimensionError,
    Observable,
    Outcome,
    Projector,
    StateVector,
    X_AXIS,
    Z_AXIS,
    apply_projector,
    born_probability,
    inner_product,
    projector_observable,
    spin_observable,
)
from .abl import (
    MeasurementSequence,
    OutcomeDistribution,
    PrePostContext,
    ZeroDenominator,
    abl_distribution,
    abl_probability,
    abl_sequence_distribution,
    is_special_case,
    time_reverse,
)
from .simulate import SimulationReport, frequency_vs_abl, postselection_survival, run_trials
from .analysis import build_world_sets, cotenability, discrepancy_scan, sharp_shanks, three_box

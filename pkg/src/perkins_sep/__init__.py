"""Barrier-type Skorokhod embeddings that keep the running maximum small."""

__version__ = "0.1.0"

from .analysis import (
    AuxiliaryFunction,
    DominanceVerdict,
    ObjectiveVector,
    dominance,
    extrema_cdf,
    loynes_check,
    monotonicity_audit,
    objective_vector,
    verify_embedding,
)
from .barriers import DBarrier, TimeSpaceBarrier, VhBarrier, to_dbarrier, union, vh_hit
from .calibration import CalibrationResult, calibrate_perkins, feasible_band, perturb_solution
from .engine import StoppedLaw, dbarrier_stopped_law, exact_stopped_law, mc_stopped_law
from .errors import (
    ConvexOrderViolated,
    EmbeddingError,
    MassLeak,
    NoProgress,
    NonTerminating,
    ParseError,
    PathBudgetExceeded,
)
from .estimators import PerkinsEmbedding
from .measures import DiscreteMeasure, convex_order, meet, moment, potential
from .rules import AzemaYor, HobsonPedersen, Perkins, Root, Rost, should_stop

__all__ = [
    "AuxiliaryFunction",
    "AzemaYor",
    "CalibrationResult",
    "ConvexOrderViolated",
    "DBarrier",
    "DiscreteMeasure",
    "DominanceVerdict",
    "EmbeddingError",
    "HobsonPedersen",
    "MassLeak",
    "NoProgress",
    "NonTerminating",
    "ObjectiveVector",
    "ParseError",
    "PathBudgetExceeded",
    "Perkins",
    "PerkinsEmbedding",
    "Root",
    "Rost",
    "StoppedLaw",
    "TimeSpaceBarrier",
    "VhBarrier",
    "calibrate_perkins",
    "convex_order",
    "dbarrier_stopped_law",
    "dominance",
    "exact_stopped_law",
    "extrema_cdf",
    "feasible_band",
    "loynes_check",
    "mc_stopped_law",
    "meet",
    "moment",
    "monotonicity_audit",
    "objective_vector",
    "perturb_solution",
    "potential",
    "should_stop",
    "to_dbarrier",
    "union",
    "verify_embedding",
    "vh_hit",
]

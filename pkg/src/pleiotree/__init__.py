"""Joint mixture modeling of multi-trait GWAS p-values with an annotation
regression tree prior and FDR-controlled SNP prioritization."""

from .em import EmConfig, FitResult, e_step, fit, fit_baseline, run_stage1, run_stage2
from .errors import ConfigError, DataError, NumericError, PleiotreeError, ShapeError
from .fdr import FdrTarget, control_global_fdr, declare_at_lfdr, local_fdr
from .model import (
    AnnotationPanel,
    MixtureParams,
    PValuePanel,
    StateSpace,
    component_density,
    complete_loglik,
    incomplete_loglik,
)
from .sim import MetricsReport, SimConfig, SimTruth, evaluate, simulate
from .tree import AnnotationTree, TreeConfig, grow, prune

__version__ = "0.1.0"

__all__ = [
    "AnnotationPanel",
    "AnnotationTree",
    "ConfigError",
    "DataError",
    "EmConfig",
    "FdrTarget",
    "FitResult",
    "MetricsReport",
    "MixtureParams",
    "NumericError",
    "PleiotreeError",
    "PValuePanel",
    "ShapeError",
    "SimConfig",
    "SimTruth",
    "StateSpace",
    "complete_loglik",
    "component_density",
    "control_global_fdr",
    "declare_at_lfdr",
    "e_step",
    "evaluate",
    "fit",
    "fit_baseline",
    "grow",
    "incomplete_loglik",
    "local_fdr",
    "prune",
    "run_stage1",
    "run_stage2",
    "simulate",
]

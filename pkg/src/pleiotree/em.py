"""Two-stage EM driver.

Stage 1 estimates the Beta shape parameters with a multivariate linear
regression prior on the annotations. Stage 2 fixes those parameters and
runs a generalized EM whose M-step fits a multivariate regression tree to
the posteriors; only iterations that strictly increase the observed-data
log-likelihood are retained, and the first rejected iteration stops the
loop.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import NumericError, ShapeError
from .model import (
    ALPHA_MIN,
    AnnotationPanel,
    PRIOR_FLOOR,
    PValuePanel,
    StateSpace,
    check_prob_matrix,
    clamp_alpha,
    log_density_matrix,
)
from .tree import AnnotationTree, TreeConfig, grow, prune, single_leaf_tree

SIMPLEX_FLOOR = 1e-6


@dataclass
class EmConfig:
    alpha_init: float = 0.1
    max_iter_stage1: int = 1000
    max_iter_stage2: int = 200
    tol_loglik: float = 1e-4
    tol_alpha: float = 1e-6
    tree: TreeConfig = field(default_factory=TreeConfig)

    def __post_init__(self):
        if self.tol_loglik <= 0 or self.tol_alpha <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter_stage1 < 1 or self.max_iter_stage2 < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class Stage1Result:
    alpha: np.ndarray
    priors: np.ndarray
    posteriors: np.ndarray
    loglik_trace: list[float]
    converged: bool
    n_iter: int
    rank_deficient: bool = False
    alpha_stuck: bool = False
    max_loglik_decrease: float = 0.0


@dataclass
class FitResult:
    alpha: np.ndarray
    tree: AnnotationTree
    priors: np.ndarray
    posteriors: np.ndarray
    stage1: Stage1Result
    stage2_loglik_trace: list[float]
    n_accepted: int
    n_rejected: int
    stage2_converged: bool
    trait_names: list[str] = field(default_factory=list)
    snp_ids: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.stage1.converged and self.stage2_converged

    @property
    def loglik(self) -> float:
        return self.stage2_loglik_trace[-1]


def _as_values(pvals) -> tuple[np.ndarray, list, list]:
    if isinstance(pvals, PValuePanel):
        return pvals.values, list(pvals.snp_ids), list(pvals.trait_names)
    values = np.asarray(pvals, dtype=float)
    return values, [], [f"P{d + 1}" for d in range(values.shape[1])]


def e_step(pvals, priors, alpha) -> np.ndarray:
    """Posterior state probabilities, Bayes' rule in log space."""
    values, _, _ = _as_values(pvals)
    space = StateSpace(values.shape[1])
    priors = check_prob_matrix(priors, space.size)
    if priors.shape[0] != values.shape[0]:
        raise ShapeError("priors and p-values disagree on SNP count")
    log_terms = np.log(np.maximum(priors, PRIOR_FLOOR)) + log_density_matrix(
        np.log(values), np.asarray(alpha, dtype=float), space
    )
    log_post = log_terms - logsumexp(log_terms, axis=1, keepdims=True)
    return np.exp(log_post)


def update_alpha(pvals, posteriors, prev_alpha=None) -> tuple[np.ndarray, bool]:
    """Closed-form M-step for the Beta shapes.

    alpha_d = -(sum_i w_id) / (sum_i w_id log y_id), where w_id is the total
    posterior mass on states with trait d non-null. A trait with no usable
    non-null weight keeps its previous value and raises the stuck flag.
    """
    values, _, _ = _as_values(pvals)
    space = StateSpace(values.shape[1])
    z = check_prob_matrix(posteriors, space.size)
    if z.shape[0] != values.shape[0]:
        raise ShapeError("posteriors and p-values disagree on SNP count")
    weights = z @ space.bits  # (M, D) non-null mass per trait
    numer = weights.sum(axis=0)
    denom = (weights * np.log(values)).sum(axis=0)
    usable = (numer > 1e-12) & (denom < -1e-300)
    if prev_alpha is None:
        prev = np.full(space.n_traits, 0.5)
    else:
        prev = clamp_alpha(prev_alpha)
    alpha = np.where(usable, -numer / np.where(usable, denom, -1.0), prev)
    return clamp_alpha(alpha), bool(np.any(~usable))


def _ols_fitted(design: np.ndarray, responses: np.ndarray) -> tuple[np.ndarray, int]:
    coef, _, rank, _ = np.linalg.lstsq(design, responses, rcond=None)
    return design @ coef, int(rank)


def project_to_simplex(rows: np.ndarray) -> np.ndarray:
    """Floor entries at 1e-6 and renormalize each row to sum 1."""
    floored = np.maximum(rows, SIMPLEX_FLOOR)
    return floored / floored.sum(axis=1, keepdims=True)


def fit_linear_prior(posteriors, annotations) -> np.ndarray:
    """OLS of each posterior column on [1, a_1, ..., a_K], simplex-projected."""
    priors, _ = _fit_linear_prior(posteriors, annotations)
    return priors


def _fit_linear_prior(posteriors, annotations) -> tuple[np.ndarray, bool]:
    z = np.asarray(posteriors, dtype=float)
    if isinstance(annotations, AnnotationPanel):
        a = annotations.values
    else:
        a = np.asarray(annotations, dtype=float)
        if a.size == 0:
            a = a.reshape(z.shape[0], 0)
    if a.shape[0] != z.shape[0]:
        raise ShapeError("annotations and posteriors disagree on row count")
    design = np.hstack([np.ones((z.shape[0], 1)), a])
    fitted, rank = _ols_fitted(design, z)
    return project_to_simplex(fitted), rank < design.shape[1]


def run_stage1(pvals, annotations, config: EmConfig | None = None) -> Stage1Result:
    """Estimate alpha with the linear prior model.

    Iterates E-step, linear prior refit, and the closed-form alpha update
    until both the log-likelihood and alpha deltas drop below tolerance.
    """
    from .model import incomplete_loglik

    config = config or EmConfig()
    values, _, _ = _as_values(pvals)
    m, d = values.shape
    space = StateSpace(d)
    alpha = clamp_alpha(np.full(d, config.alpha_init))
    priors = np.full((m, space.size), 1.0 / space.size)
    ll_prev = incomplete_loglik(values, priors, alpha)
    trace = [ll_prev]
    converged = False
    rank_deficient = False
    alpha_stuck = False
    max_decrease = 0.0
    posteriors = priors
    n_iter = 0
    for n_iter in range(1, config.max_iter_stage1 + 1):
        posteriors = e_step(values, priors, alpha)
        priors, deficient = _fit_linear_prior(posteriors, annotations)
        rank_deficient = rank_deficient or deficient
        alpha_new, stuck = update_alpha(values, posteriors, alpha)
        alpha_stuck = alpha_stuck or stuck
        ll = incomplete_loglik(values, priors, alpha_new)
        if not np.isfinite(ll):
            raise NumericError(f"non-finite log-likelihood at iteration {n_iter}")
        trace.append(ll)
        max_decrease = max(max_decrease, ll_prev - ll)
        delta_alpha = float(np.max(np.abs(alpha_new - alpha)))
        alpha = alpha_new
        if abs(ll - ll_prev) < config.tol_loglik and delta_alpha < config.tol_alpha:
            ll_prev = ll
            converged = True
            break
        ll_prev = ll
    posteriors = e_step(values, priors, alpha)
    return Stage1Result(
        alpha=alpha,
        priors=priors,
        posteriors=posteriors,
        loglik_trace=trace,
        converged=converged,
        n_iter=n_iter,
        rank_deficient=rank_deficient,
        alpha_stuck=alpha_stuck,
        max_loglik_decrease=max_decrease,
    )


def run_stage2(pvals, annotations, stage1: Stage1Result,
               config: EmConfig | None = None) -> FitResult:
    """Generalized EM with the tree M-step and fixed alpha.

    Each iteration grows and prunes a tree on the current posteriors and
    replaces the priors with the tree predictions; the iteration is kept
    only if it strictly increases the observed-data log-likelihood, and the
    first rejection ends the loop with the previous state restored.
    """
    from .model import incomplete_loglik

    config = config or EmConfig()
    values, snp_ids, trait_names = _as_values(pvals)
    if isinstance(annotations, AnnotationPanel):
        annot_names = list(annotations.annotation_names)
        annot_values = annotations.values
    else:
        annot_values = np.asarray(annotations, dtype=float)
        annot_names = [f"A{k + 1}" for k in range(annot_values.shape[1])]

    alpha = stage1.alpha
    priors = stage1.priors
    ll_prev = incomplete_loglik(values, priors, alpha)
    trace = [ll_prev]
    best_tree: AnnotationTree | None = None
    n_accepted = 0
    n_rejected = 0
    converged = False
    for _ in range(config.max_iter_stage2):
        posteriors = e_step(values, priors, alpha)
        tree = prune(grow(annot_values, posteriors, config.tree), config.tree.cp)
        tree.annotation_names = annot_names
        priors_new = tree.predict(annot_values)
        ll = incomplete_loglik(values, priors_new, alpha)
        if not np.isfinite(ll):
            raise NumericError("non-finite log-likelihood in tree stage")
        if ll <= ll_prev:
            n_rejected += 1
            converged = True  # natural stop: no improving tree update exists
            break
        n_accepted += 1
        priors = priors_new
        best_tree = tree
        trace.append(ll)
        if ll - ll_prev < config.tol_loglik:
            ll_prev = ll
            converged = True
            break
        ll_prev = ll
    posteriors = e_step(values, priors, alpha)
    if best_tree is None:
        # Every tree update was rejected; fall back to an intercept-only tree.
        best_tree = single_leaf_tree(posteriors, annot_names)
    return FitResult(
        alpha=alpha,
        tree=best_tree,
        priors=priors,
        posteriors=posteriors,
        stage1=stage1,
        stage2_loglik_trace=trace,
        n_accepted=n_accepted,
        n_rejected=n_rejected,
        stage2_converged=converged,
        trait_names=trait_names,
        snp_ids=snp_ids,
    )


def fit(pvals, annotations, config: EmConfig | None = None) -> FitResult:
    """Full pipeline: Stage 1 then Stage 2."""
    config = config or EmConfig()
    stage1 = run_stage1(pvals, annotations, config)
    return run_stage2(pvals, annotations, stage1, config)


def fit_baseline(pvals, config: EmConfig | None = None) -> FitResult:
    """Annotation-blind reference fit: intercept-only prior, no tree stage.

    The priors collapse to the global mixture proportions, giving an
    AUC/power comparison point for the annotation-informed model.
    """
    config = config or EmConfig()
    values, snp_ids, trait_names = _as_values(pvals)
    empty = np.zeros((values.shape[0], 0))
    stage1 = run_stage1(values, empty, config)
    tree = single_leaf_tree(stage1.posteriors, [])
    return FitResult(
        alpha=stage1.alpha,
        tree=tree,
        priors=stage1.priors,
        posteriors=stage1.posteriors,
        stage1=stage1,
        stage2_loglik_trace=[stage1.loglik_trace[-1]],
        n_accepted=0,
        n_rejected=0,
        stage2_converged=stage1.converged,
        trait_names=trait_names,
        snp_ids=snp_ids,
    )

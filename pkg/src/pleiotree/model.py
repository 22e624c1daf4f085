"""Joint association-state mixture model for multi-trait GWAS p-values.

Each SNP occupies exactly one of 2^D latent states indicating for which of
the D traits it is non-null. Null p-values are uniform on (0, 1]; non-null
p-values for trait d follow Beta(alpha_d, 1) with 0 < alpha_d < 1. All
densities are evaluated in log space and mixed with log-sum-exp so that
very small p-values cannot overflow.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, DataError, ShapeError

MAX_TRAITS = 4
PVALUE_FLOOR = 1e-30
ALPHA_MIN = 1e-6
ALPHA_MAX = 1.0 - 1e-6
PRIOR_FLOOR = 1e-12
ROW_SUM_TOL = 1e-9


class StateSpace:
    """Canonical enumeration of the 2^D joint association states.

    States are ordered by binary counting with trait 1 as the lowest-order
    bit, so for D = 2 the order is 00, 10, 01, 11. In a state label the
    d-th character is the non-null indicator for trait d.
    """

    def __init__(self, n_traits: int):
        n_traits = int(n_traits)
        if not 1 <= n_traits <= MAX_TRAITS:
            raise ConfigError(
                f"trait count must be in [1, {MAX_TRAITS}], got {n_traits}"
            )
        self.n_traits = n_traits
        self.size = 2 ** n_traits
        # bits[l, d] = 1 iff trait d is non-null in state l
        self.bits = np.array(
            [[(l >> d) & 1 for d in range(n_traits)] for l in range(self.size)],
            dtype=float,
        )
        self.labels = [
            "".join(str(int(b)) for b in row) for row in self.bits
        ]

    def __len__(self) -> int:
        return self.size

    @property
    def states(self) -> list[tuple[int, ...]]:
        return [tuple(int(b) for b in row) for row in self.bits]

    def null_mask(self, trait: int) -> np.ndarray:
        """Boolean mask over states where `trait` (0-based) is null."""
        if not 0 <= trait < self.n_traits:
            raise ConfigError(f"trait index {trait} out of range")
        return self.bits[:, trait] == 0


def clamp_alpha(alpha) -> np.ndarray:
    return np.clip(np.asarray(alpha, dtype=float), ALPHA_MIN, ALPHA_MAX)


def clamp_pvalues(values) -> np.ndarray:
    """Clamp raw p-values into (0, 1]; Beta densities need y > 0."""
    return np.clip(np.asarray(values, dtype=float), PVALUE_FLOOR, 1.0)


@dataclass
class MixtureParams:
    """Beta(alpha_d, 1) shape parameters, one per trait, clamped to (0, 1)."""

    alpha: np.ndarray

    def __post_init__(self):
        self.alpha = clamp_alpha(self.alpha)
        if self.alpha.ndim != 1 or self.alpha.size < 1:
            raise ShapeError("alpha must be a non-empty vector")

    @property
    def n_traits(self) -> int:
        return self.alpha.size


@dataclass
class PValuePanel:
    """M x D matrix of GWAS association p-values with SNP/trait identifiers."""

    snp_ids: list
    trait_names: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ShapeError("p-value matrix must be 2-dimensional")
        m, d = self.values.shape
        if m < 1 or d < 1:
            raise ShapeError("p-value panel must have at least one SNP and trait")
        if len(self.snp_ids) != m:
            raise ShapeError("snp_ids length does not match row count")
        if len(self.trait_names) != d:
            raise ShapeError("trait_names length does not match column count")
        if np.any(self.values <= 0.0) or np.any(self.values > 1.0):
            raise DataError("p-values must lie in (0, 1] after clamping")

    @property
    def n_snps(self) -> int:
        return self.values.shape[0]

    @property
    def n_traits(self) -> int:
        return self.values.shape[1]


@dataclass
class AnnotationPanel:
    """M x K binary annotation matrix with SNP/annotation identifiers."""

    snp_ids: list
    annotation_names: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ShapeError("annotation matrix must be 2-dimensional")
        m, k = self.values.shape
        if m < 1 or k < 1:
            raise ShapeError("annotation panel must have at least one SNP and column")
        if len(self.snp_ids) != m:
            raise ShapeError("snp_ids length does not match row count")
        if len(self.annotation_names) != k:
            raise ShapeError("annotation_names length does not match column count")
        if not np.all((self.values == 0.0) | (self.values == 1.0)):
            raise DataError("annotation entries must be strictly binary")

    @property
    def n_snps(self) -> int:
        return self.values.shape[0]

    @property
    def n_annotations(self) -> int:
        return self.values.shape[1]


def check_prob_matrix(values: np.ndarray, n_states: int | None = None,
                      tol: float = ROW_SUM_TOL) -> np.ndarray:
    """Validate an M x S row-stochastic matrix (priors or posteriors)."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ShapeError("probability matrix must be 2-dimensional")
    if n_states is not None and values.shape[1] != n_states:
        raise ShapeError(
            f"probability matrix has {values.shape[1]} columns, expected {n_states}"
        )
    if np.any(values < -tol) or np.any(values > 1.0 + tol):
        raise DataError("probability entries must lie in [0, 1]")
    row_sums = values.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > tol):
        raise DataError("probability matrix rows must sum to 1")
    return values


def log_density_matrix(log_p: np.ndarray, alpha: np.ndarray,
                       space: StateSpace) -> np.ndarray:
    """Log component densities, shape (M, S).

    log f(y_i | state l) = sum_d bit(l, d) * [log alpha_d + (alpha_d - 1) log y_id].
    Null bits contribute log 1 = 0. Alpha is used as given; clamping happens
    where parameters are created or updated.
    """
    alpha = np.asarray(alpha, dtype=float)
    per_trait = np.log(alpha)[None, :] + (alpha - 1.0)[None, :] * log_p
    return per_trait @ space.bits.T


def component_density(y_row, state: int, alpha) -> float:
    """Density of one p-value vector under one association state."""
    y = np.asarray(y_row, dtype=float).reshape(-1)
    if np.any(y <= 0.0) or np.any(y > 1.0):
        raise DataError("p-values must lie in (0, 1]; clamp at ingestion")
    space = StateSpace(y.size)
    if not 0 <= int(state) < space.size:
        raise ConfigError(f"state index {state} out of range for D={y.size}")
    ld = log_density_matrix(np.log(y)[None, :], alpha, space)
    return float(np.exp(ld[0, int(state)]))


def _aligned_log_terms(pvals: np.ndarray, priors: np.ndarray,
                       alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pvals = np.asarray(pvals, dtype=float)
    space = StateSpace(pvals.shape[1])
    priors = check_prob_matrix(priors, space.size)
    if priors.shape[0] != pvals.shape[0]:
        raise ShapeError("priors and p-values disagree on SNP count")
    log_dens = log_density_matrix(np.log(pvals), alpha, space)
    log_pi = np.log(np.maximum(priors, PRIOR_FLOOR))
    return log_pi, log_dens


def incomplete_loglik(pvals, priors, alpha) -> float:
    """Observed-data log-likelihood: sum_i log sum_l pi_il f(y_i | l)."""
    log_pi, log_dens = _aligned_log_terms(pvals, priors, alpha)
    ll = float(logsumexp(log_pi + log_dens, axis=1).sum())
    if not np.isfinite(ll):
        from .errors import NumericError

        raise NumericError("incomplete log-likelihood is not finite")
    return ll


def complete_loglik(pvals, priors, posteriors, alpha) -> float:
    """Expected complete-data log-likelihood with posteriors as weights."""
    log_pi, log_dens = _aligned_log_terms(pvals, priors, alpha)
    z = check_prob_matrix(posteriors, log_pi.shape[1])
    if z.shape[0] != log_pi.shape[0]:
        raise ShapeError("posteriors and p-values disagree on SNP count")
    terms = log_pi + log_dens
    return float(np.where(z > 0.0, z * terms, 0.0).sum())

"""Local fdr computation and global FDR control from posterior state mass.

The marginal local fdr for a trait is the posterior mass on states where
that trait is null; the joint local fdr for a set of traits is the mass on
every state where at least one of them is null. Global FDR is controlled
with the direct posterior probability rule: sort the local fdr values and
declare the longest prefix whose running mean stays at or below the level.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import StateSpace, check_prob_matrix


@dataclass(frozen=True)
class FdrTarget:
    """Either marginal for one trait or joint over a set of traits (0-based)."""

    kind: str
    traits: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in ("marginal", "joint"):
            raise ConfigError(f"unknown fdr target kind: {self.kind}")
        if self.kind == "marginal" and len(self.traits) != 1:
            raise ConfigError("marginal target takes exactly one trait")
        if self.kind == "joint" and len(self.traits) < 1:
            raise ConfigError("joint target needs at least one trait")

    @classmethod
    def marginal(cls, trait: int) -> "FdrTarget":
        return cls("marginal", (int(trait),))

    @classmethod
    def joint(cls, traits) -> "FdrTarget":
        return cls("joint", tuple(int(t) for t in traits))

    def label(self, trait_names: list[str]) -> str:
        return "_".join(trait_names[t] for t in self.traits)


def default_targets(n_traits: int) -> list[FdrTarget]:
    """All marginals plus the all-traits joint target (for D >= 2)."""
    targets = [FdrTarget.marginal(d) for d in range(n_traits)]
    if n_traits >= 2:
        targets.append(FdrTarget.joint(range(n_traits)))
    return targets


def local_fdr(posteriors, target: FdrTarget) -> np.ndarray:
    """Posterior null mass per SNP for the requested target."""
    z = np.asarray(posteriors, dtype=float)
    d = int(round(np.log2(z.shape[1])))  # recover D from S = 2^D
    space = StateSpace(d)
    z = check_prob_matrix(z, space.size)
    for t in target.traits:
        if not 0 <= t < d:
            raise ConfigError(f"trait index {t} out of range for D={d}")
    if target.kind == "marginal":
        mask = space.bits[:, target.traits[0]] == 0
    else:
        mask = (space.bits[:, list(target.traits)] == 0).any(axis=1)
    return z[:, mask].sum(axis=1)


def declare_at_lfdr(fdr, level: float) -> np.ndarray:
    """Per-SNP thresholding: declared iff local fdr <= level."""
    if not 0.0 < level < 1.0:
        raise ConfigError(f"level must be in (0, 1), got {level}")
    return np.asarray(fdr, dtype=float) <= level


def control_global_fdr(fdr, level: float) -> np.ndarray:
    """Direct posterior probability control of the global FDR.

    Declares the largest ascending prefix of local fdr values whose running
    mean is <= level. SNPs tied at the cutoff value are declared together
    only if including all of them keeps the constraint, so the result is
    invariant to input order.
    """
    if not 0.0 < level < 1.0:
        raise ConfigError(f"level must be in (0, 1), got {level}")
    values = np.asarray(fdr, dtype=float)
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    running_mean = np.cumsum(sorted_vals) / np.arange(1, values.size + 1)
    ok = running_mean <= level
    if not ok.any():
        return np.zeros(values.size, dtype=bool)
    n_declared = int(np.max(np.nonzero(ok)[0])) + 1
    # All-or-none tie handling: shrink past any tie group split at the cutoff.
    cutoff = sorted_vals[n_declared - 1]
    while n_declared < values.size and sorted_vals[n_declared] == cutoff:
        n_declared -= 1
        if n_declared == 0:
            return np.zeros(values.size, dtype=bool)
        cutoff = sorted_vals[n_declared - 1]
    return values <= cutoff

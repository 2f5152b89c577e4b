"""Computable generic-chaining quantities for finite function classes.

The gamma_2 functional is never computed exactly (the infimum over
admissible sequences is combinatorially infeasible); everything here is an
explicit upper bound (greedy constructions), an entropy-integral companion
value, or a Gaussian-width Monte Carlo proxy, with constants reported by
the callers.  Also included: the auxiliary inequality checks used by the
verification suite (sign-flip rearrangement bound, order statistics of
i.i.d. samples, sup of max coordinates) and the integer cutoff sequence
that drives the largest-coordinate bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .ensembles import GAUSSIAN_PSI2, SpectrumSpec

__all__ = [
    "ScalarLaw",
    "GradedNorm",
    "GradedNormQuery",
    "FiniteFunctionClass",
    "AdmissibleSequence",
    "CutoffSequence",
    "graded_lq_norm",
    "coordinate_cutoffs",
    "greedy_gamma2_upper",
    "dudley_bound",
    "gaussian_width_proxy",
    "lambda_graded_value",
    "hoeffding_rearrangement_check",
    "order_stats_check",
    "linf_ratio_statistic",
    "linf_sup_check",
]


# ---------------------------------------------------------------------------
# scalar laws with closed-form absolute moments


@dataclass(frozen=True)
class ScalarLaw:
    """One-dimensional law with closed-form L_p norms.

    Kinds: gaussian(sigma), rademacher(a), laplace(b), constant(c), and
    product of independent factors (L_p norms multiply).
    """

    kind: str
    scale: float = 1.0
    factors: tuple["ScalarLaw", ...] = ()

    @classmethod
    def gaussian(cls, sigma: float = 1.0) -> "ScalarLaw":
        return cls("gaussian", float(sigma))

    @classmethod
    def rademacher(cls, a: float = 1.0) -> "ScalarLaw":
        return cls("rademacher", float(a))

    @classmethod
    def laplace(cls, b: float) -> "ScalarLaw":
        return cls("laplace", float(b))

    @classmethod
    def constant(cls, c: float) -> "ScalarLaw":
        return cls("constant", float(c))

    @classmethod
    def product(cls, *factors: "ScalarLaw") -> "ScalarLaw":
        return cls("product", 1.0, tuple(factors))

    def log_abs_moment(self, p: float) -> float:
        """log E|X|^p."""
        if p < 0:
            raise ValueError("moment order must be non-negative")
        if self.kind == "gaussian":
            # E|sigma Z|^p = sigma^p 2^(p/2) Gamma((p+1)/2) / sqrt(pi)
            return (p * math.log(abs(self.scale)) + 0.5 * p * math.log(2.0)
                    + gammaln((p + 1.0) / 2.0) - 0.5 * math.log(math.pi))
        if self.kind in ("rademacher", "constant"):
            return p * math.log(abs(self.scale)) if self.scale != 0.0 else -math.inf
        if self.kind == "laplace":
            return p * math.log(abs(self.scale)) + gammaln(p + 1.0)
        if self.kind == "product":
            return sum(f.log_abs_moment(p) for f in self.factors)
        raise ValueError(self.kind)

    def lp_norm(self, p: float) -> float:
        if p == 0:
            return 1.0
        return math.exp(self.log_abs_moment(p) / p)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "gaussian":
            return self.scale * rng.standard_normal(size)
        if self.kind == "rademacher":
            return self.scale * (2.0 * rng.integers(0, 2, size=size) - 1.0)
        if self.kind == "laplace":
            return rng.laplace(0.0, self.scale, size=size)
        if self.kind == "constant":
            return np.full(size, self.scale)
        if self.kind == "product":
            out = np.ones(size)
            for f in self.factors:
                out = out * f.sample(rng, size)
            return out
        raise ValueError(self.kind)


class GradedNorm(NamedTuple):
    value: float
    saturated: bool


@dataclass(frozen=True)
class GradedNormQuery:
    """Subject of a graded-norm evaluation: a ScalarLaw or an empirical
    sample array, together with the order q >= 1."""

    subject: object
    order: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.order) or self.order < 1.0:
            raise ValueError("order q must be finite and >= 1")


def _empirical_log_lp(sample: np.ndarray, p: float) -> float:
    """log of the empirical L_p norm, computed in log space."""
    x = np.abs(np.asarray(sample, dtype=np.float64)).ravel()
    with np.errstate(divide="ignore"):
        logs = np.log(x)
    return float(logsumexp(p * logs) - math.log(x.size)) / p


def graded_lq_norm(query: GradedNormQuery, grid_step: float = 0.05) -> GradedNorm:
    """sup over p in [1, q] of L_p norm / sqrt(p), on a dense grid.

    The grid has the given step plus both endpoints; for the supported
    laws the map p -> L_p/sqrt(p) is smooth and unimodal, so the grid
    error is negligible at desk scale.  Overflow to infinity is reported
    through the saturation flag.
    """
    q = query.order
    grid = np.arange(1.0, q, grid_step)
    ps = np.concatenate([grid, [q]])
    best = 0.0
    saturated = False
    subject = query.subject
    for p in ps:
        p = float(p)
        if isinstance(subject, ScalarLaw):
            log_lp = subject.log_abs_moment(p) / p
        else:
            log_lp = _empirical_log_lp(subject, p)
        if log_lp == -math.inf:
            val = 0.0
        elif log_lp > 700.0:  # exp would overflow
            val = math.inf
        else:
            val = math.exp(log_lp) / math.sqrt(p)
        if math.isinf(val):
            saturated = True
        best = max(best, val)
    return GradedNorm(best, saturated)


def _gaussian_graded_unit(q: float, grid_step: float = 0.05) -> float:
    """Graded norm of a standard Gaussian (scales linearly in sigma)."""
    return graded_lq_norm(GradedNormQuery(ScalarLaw.gaussian(1.0), q), grid_step).value


# ---------------------------------------------------------------------------
# cutoff sequence for largest-coordinate bookkeeping


class CutoffSequence(NamedTuple):
    scales: tuple[int, ...]
    values: tuple[int, ...]
    first_saturated: int | None  # first scale with value n + 1


def coordinate_cutoffs(u: float, p: int, n: int, s_range: Sequence[int],
                       c0: float = 1.0) -> CutoffSequence:
    """Integer cutoffs j_s = min(ceil(c0 u^2 p 2^s / log(4 + e n/(u^2 p 2^s))), n+1).

    Non-decreasing in s, u and c0; capped at n + 1.  Also reports the
    first scale at which the cap engages.  Whenever consecutive values
    satisfy 1 < j_{s-1} and j_s < n + 1, they more than double.
    """
    if u < 1.0:
        raise ValueError("u must be >= 1")
    if c0 <= 0.0:
        raise ValueError("c0 must be positive")
    scales = tuple(int(s) for s in s_range)
    values = []
    first_saturated = None
    for s in scales:
        mass = u * u * p * (2.0**s)
        j = min(int(math.ceil(c0 * mass / math.log(4.0 + math.e * n / mass))), n + 1)
        values.append(j)
        if j == n + 1 and first_saturated is None:
            first_saturated = s
    return CutoffSequence(scales, tuple(values), first_saturated)


# ---------------------------------------------------------------------------
# finite linear function classes and admissible sequences


@dataclass(frozen=True)
class FiniteFunctionClass:
    """Finite set of linear functionals x -> <x, v> under a Gaussian base
    measure with the given diagonal covariance.

    The pairwise psi2 distance is sqrt((v-u)^T Sigma (v-u)) times the
    one-dimensional Gaussian psi2 constant, hence proportional to the L2
    distance; greedy constructions are identical under either metric.
    """

    points: np.ndarray  # (M, d)
    spectrum: SpectrumSpec

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError("points must be a 2-d array (M, d)")
        if pts.shape[1] != self.spectrum.dim:
            raise ValueError("point dimension does not match spectrum")
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @cached_property
    def l2_distances(self) -> np.ndarray:
        lam = self.spectrum.array
        scaled = self.points * np.sqrt(lam)
        sq = np.sum(scaled**2, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (scaled @ scaled.T)
        dist = np.sqrt(np.maximum(d2, 0.0))
        np.fill_diagonal(dist, 0.0)
        return dist

    @cached_property
    def psi2_distances(self) -> np.ndarray:
        return GAUSSIAN_PSI2 * self.l2_distances

    def functional_std(self, w: np.ndarray) -> float:
        """Standard deviation of <X, w> for X ~ N(0, Sigma)."""
        return math.sqrt(float(np.sum(self.spectrum.array * w * w)))


@dataclass(frozen=True)
class AdmissibleSequence:
    """Nested subsets with |F_0| = 1 and |F_s| <= 2^(2^s), plus per-point
    nearest-representative assignments at every level."""

    levels: tuple[tuple[int, ...], ...]
    assignments: np.ndarray  # (num_levels, M) index of nearest representative

    def validate(self, size: int) -> None:
        if len(self.levels[0]) != 1:
            raise ValueError("level 0 must be a single point")
        prev: set[int] = set()
        for s, level in enumerate(self.levels):
            if s >= 1 and len(level) > 2 ** (2**s):
                raise ValueError(f"level {s} exceeds its cardinality cap")
            if not prev.issubset(set(level)):
                raise ValueError("levels must be nested")
            prev = set(level)
        if len(self.levels[-1]) < size and 2 ** (2 ** (len(self.levels) - 1)) >= size:
            raise ValueError("final level must cover the class once the cap allows")

    @property
    def num_levels(self) -> int:
        return len(self.levels)


def _greedy_order(dist: np.ndarray) -> list[int]:
    """Farthest-point traversal, started at the 1-center of the class."""
    m = dist.shape[0]
    order = [int(np.argmin(dist.max(axis=1)))]
    best = dist[order[0]].copy()
    for _ in range(m - 1):
        nxt = int(np.argmax(best))
        if best[nxt] == 0.0:
            remaining = [i for i in range(m) if i not in order]
            order.extend(remaining)
            break
        order.append(nxt)
        best = np.minimum(best, dist[nxt])
    return order[:m]


def _levels_from_order(order: list[int], m: int) -> list[list[int]]:
    levels = []
    s = 0
    while True:
        cap = 1 if s == 0 else 2 ** (2**s)
        levels.append(order[: min(m, cap)])
        if cap >= m:
            break
        s += 1
    return levels


def _build_sequence(cls: FiniteFunctionClass) -> AdmissibleSequence:
    dist = cls.psi2_distances
    order = _greedy_order(dist)
    levels = _levels_from_order(order, cls.size)
    assignments = np.zeros((len(levels), cls.size), dtype=np.intp)
    for s, level in enumerate(levels):
        sub = dist[np.ix_(range(cls.size), level)]
        assignments[s] = np.asarray(level)[np.argmin(sub, axis=1)]
    return AdmissibleSequence(tuple(tuple(lv) for lv in levels), assignments)


def greedy_gamma2_upper(cls: FiniteFunctionClass) -> tuple[float, AdmissibleSequence]:
    """Upper bound on the gamma_2 functional from a farthest-point greedy
    admissible sequence: sup_f sum_s 2^(s/2) d(f, F_s)."""
    seq = _build_sequence(cls)
    dist = cls.psi2_distances
    m = cls.size
    totals = np.zeros(m)
    for s in range(seq.num_levels):
        totals += (2.0 ** (s / 2.0)) * dist[np.arange(m), seq.assignments[s]]
    return float(totals.max()), seq


def dudley_bound(cls: FiniteFunctionClass) -> float:
    """Entropy-integral companion value: sum_s 2^(s/2) e_s with e_s the
    greedy covering radius at cardinality 2^(2^s)."""
    seq = _build_sequence(cls)
    dist = cls.psi2_distances
    m = cls.size
    total = 0.0
    for s in range(seq.num_levels):
        radius = float(dist[np.arange(m), seq.assignments[s]].max())
        total += (2.0 ** (s / 2.0)) * radius
    return total


def gaussian_width_proxy(vectors, spectrum: SpectrumSpec, trials: int = 1000,
                         rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Monte Carlo estimate of E sup_v <Y, v> for Y ~ N(0, Sigma).

    ``vectors`` is an (M, d) array of candidate directions, or the string
    "sphere" for the full unit sphere (the supremum is then |Y|).
    Returns (mean, standard error).
    """
    if trials < 100:
        raise ValueError("need at least 100 trials")
    if rng is None:
        rng = np.random.default_rng(0x5EED)
    scale = np.sqrt(spectrum.array)
    draws = rng.standard_normal((trials, spectrum.dim)) * scale
    if isinstance(vectors, str):
        if vectors != "sphere":
            raise ValueError("expected an array of vectors or the string 'sphere'")
        sups = np.linalg.norm(draws, axis=1)
    else:
        pts = np.asarray(vectors, dtype=np.float64)
        sups = (draws @ pts.T).max(axis=1)
    mean = float(sups.mean())
    stderr = float(sups.std(ddof=1) / math.sqrt(trials))
    return mean, stderr


def lambda_graded_value(cls: FiniteFunctionClass, seq: AdmissibleSequence,
                        u: float, s0: int) -> tuple[float, float]:
    """Graded chaining functionals for the GIVEN admissible sequence.

    Returns (base, augmented) where
    base = sup_f sum_{s >= s0} 2^(s/2) ||f - pi_s f||_(u^2 2^s) and
    augmented = base + 2^(s0/2) sup_f ||pi_{s0} f||_(u^2 2^{s0}).
    Both are upper bounds on the corresponding infima.  Linear functionals
    under a Gaussian base measure have ||g||_(q) = std(g) * c(q) with c(q)
    the standard Gaussian graded norm.
    """
    if u < 1.0:
        raise ValueError("u must be >= 1")
    if s0 < 0:
        raise ValueError("s0 must be >= 0")
    m = cls.size
    l2 = cls.l2_distances
    base = np.zeros(m)
    # levels beyond the stored sequence coincide with the class: zero terms
    for s in range(s0, seq.num_levels):
        cq = _gaussian_graded_unit(u * u * 2.0**s)
        base += (2.0 ** (s / 2.0)) * cq * l2[np.arange(m), seq.assignments[s]]
    base_value = float(base.max())

    level = min(s0, seq.num_levels - 1)
    cq0 = _gaussian_graded_unit(u * u * 2.0**s0)
    reps = seq.assignments[level]
    stds = np.array([cls.functional_std(cls.points[r]) for r in reps])
    augmented = base_value + (2.0 ** (s0 / 2.0)) * cq0 * float(stds.max())
    return base_value, augmented


# ---------------------------------------------------------------------------
# auxiliary inequality checks


def hoeffding_rearrangement_check(z: np.ndarray, k: int, t: float, trials: int = 4096,
                                  rng: np.random.Generator | None = None) -> float:
    """Empirical failure rate of the rearranged sign-sum bound
    |sum_i eps_i z_i| <= sum_{i<=k} |z*_i| + t (sum_{i>k} (z*_i)^2)^(1/2).

    The failure probability is at most 2 exp(-t^2/2)."""
    z = np.asarray(z, dtype=np.float64).ravel()
    n = z.size
    if not 0 <= k <= n:
        raise ValueError("k must lie in [0, n]")
    if rng is None:
        rng = np.random.default_rng(0x5EED)
    sorted_abs = np.sort(np.abs(z))[::-1]
    bound = float(sorted_abs[:k].sum()) + t * math.sqrt(float(np.sum(sorted_abs[k:] ** 2)))
    signs = 2.0 * rng.integers(0, 2, size=(trials, n)) - 1.0
    sums = np.abs(signs @ z)
    return float(np.mean(sums > bound + 1e-12))


def order_stats_check(law: ScalarLaw, n: int, w: float, c0: float = 1.0,
                      trials: int = 2048, rng: np.random.Generator | None = None) -> float:
    """Empirical violation rate of the simultaneous order-statistic bound
    Z*_i <= 2 ||Z||_{L4} (e n / i)^(3/8) for all i >= j*, with
    j* = ceil(c0 w / log(4 + e n / w)).  Violations occur with probability
    at most exp(-w)."""
    if not 1 <= w <= n:
        raise ValueError("w must lie in [1, n]")
    if rng is None:
        rng = np.random.default_rng(0x5EED)
    j_star = int(math.ceil(c0 * w / math.log(4.0 + math.e * n / w)))
    if j_star > n:
        return 0.0
    idx = np.arange(j_star, n + 1)  # 1-indexed order statistics
    thresholds = 2.0 * law.lp_norm(4.0) * (math.e * n / idx) ** 0.375
    draws = np.abs(law.sample(rng, (trials, n)))
    draws.sort(axis=1)
    tail = draws[:, ::-1][:, j_star - 1 :]
    violations = np.any(tail > thresholds, axis=1)
    return float(np.mean(violations))


def linf_ratio_statistic(samples: np.ndarray, spectrum: SpectrumSpec) -> float:
    """max_i |X_i| divided by sqrt(trace) + sqrt(op norm * log n).

    For an identity spectrum this is max_i |X_i| / (sqrt(d) + sqrt(log n)).
    """
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[0]
    denom = math.sqrt(spectrum.trace) + math.sqrt(spectrum.operator_norm * math.log(n))
    return float(np.linalg.norm(samples, axis=1).max()) / denom


class LinfStats(NamedTuple):
    mean: float
    stderr: float
    maximum: float


def linf_sup_check(spectrum: SpectrumSpec, n: int, trials: int = 512,
                   rng: np.random.Generator | None = None) -> LinfStats:
    """Monte Carlo distribution of the max-coordinate ratio statistic for
    Gaussian samples of the given spectrum; concentrates below an absolute
    constant."""
    if rng is None:
        rng = np.random.default_rng(0x5EED)
    scale = np.sqrt(spectrum.array)
    vals = np.empty(trials)
    for i in range(trials):
        draws = rng.standard_normal((n, spectrum.dim)) * scale
        vals[i] = linf_ratio_statistic(draws, spectrum)
    return LinfStats(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trials)),
                     float(vals.max()))

"""Implicit rank-one-sum deviation tensors and their operator norms.

The empirical tensor (1/N) sum_i X_i^(1) x ... x X_i^(p) is never stored
densely except inside small-scale oracles.  Operator norms are computed by
alternating maximization with restarts; nets over product spheres provide
certified values at oracle scale (p <= 3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .streams import SeededStream

__all__ = [
    "Direction",
    "PopulationSpec",
    "RankOneSum",
    "DenseTensor",
    "MatrixNormResult",
    "SolverResult",
    "RestartOutcome",
    "NetBudgetError",
    "evaluate_form",
    "wick_population_form",
    "matrix_operator_norm",
    "hopm_operator_norm",
    "net_oracle_norm",
    "projection_product_sup",
]

DEFAULT_RESTARTS = 32

MAX_WICK_ORDER = 8
MAX_DENSE_ENTRIES = 10**6
MAX_NET_ENTRIES = 10**4
MAX_NET_STEP = 0.05


class NetBudgetError(ValueError):
    """Raised when a net oracle request exceeds its certified budget."""


def _unit(v: np.ndarray) -> np.ndarray:
    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / nrm


@dataclass(frozen=True)
class Direction:
    """One unit vector per tensor slot."""

    vectors: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        for v in self.vectors:
            if abs(float(np.linalg.norm(v)) - 1.0) > 1e-12:
                raise ValueError("direction vectors must be unit within 1e-12")

    @classmethod
    def normalized(cls, vectors: Sequence[np.ndarray]) -> "Direction":
        return cls(tuple(_unit(np.asarray(v, dtype=np.float64)) for v in vectors))

    @property
    def p(self) -> int:
        return len(self.vectors)


def _pairings(items: list[int]):
    """All perfect matchings of an even-sized index list."""
    if not items:
        yield []
        return
    a = items[0]
    for j in range(1, len(items)):
        b = items[j]
        rest = items[1:j] + items[j + 1 :]
        for tail in _pairings(rest):
            yield [(a, b)] + tail


@dataclass(frozen=True)
class PopulationSpec:
    """Population tensor E[X^(1) x ... x X^(p)] in the supported cases.

    kind "zero": independent centered components.
    kind "diagonal": p = 2, diagonal cross-covariance (values on the
        common leading diagonal).
    kind "wick": identical Gaussian components with the given diagonal
        covariance; moments evaluated by pairing sums on demand.
    """

    kind: str
    diag: tuple[float, ...] | None = None
    eigenvalues: tuple[float, ...] | None = None
    order: int = 0

    @classmethod
    def zero(cls) -> "PopulationSpec":
        return cls("zero")

    @classmethod
    def diagonal(cls, values) -> "PopulationSpec":
        return cls("diagonal", diag=tuple(float(v) for v in values))

    @classmethod
    def wick(cls, eigenvalues, order: int) -> "PopulationSpec":
        if order > MAX_WICK_ORDER:
            raise ValueError(f"pairing sum guard: order {order} exceeds {MAX_WICK_ORDER}")
        return cls("wick", eigenvalues=tuple(float(v) for v in eigenvalues), order=int(order))

    def form(self, vectors: Sequence[np.ndarray]) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "diagonal":
            m = len(self.diag)
            d = np.asarray(self.diag)
            return float(np.sum(d * vectors[0][:m] * vectors[1][:m]))
        if self.kind == "wick":
            if self.order % 2 == 1:
                return 0.0
            lam = np.asarray(self.eigenvalues)
            total = 0.0
            for pairing in _pairings(list(range(self.order))):
                term = 1.0
                for a, b in pairing:
                    term *= float(np.sum(lam * vectors[a] * vectors[b]))
                total += term
            return total
        raise ValueError(self.kind)

    def gradient(self, vectors: Sequence[np.ndarray], k: int) -> np.ndarray:
        """Gradient of form(...) in slot k, holding the other slots fixed."""
        if self.kind == "zero":
            return np.zeros_like(vectors[k])
        if self.kind == "diagonal":
            m = len(self.diag)
            d = np.asarray(self.diag)
            other = vectors[1 - k]
            g = np.zeros_like(vectors[k])
            g[:m] = d * other[:m]
            return g
        if self.kind == "wick":
            g = np.zeros_like(vectors[k])
            if self.order % 2 == 1:
                return g
            lam = np.asarray(self.eigenvalues)
            for pairing in _pairings(list(range(self.order))):
                partner = None
                rest = 1.0
                for a, b in pairing:
                    if a == k or b == k:
                        partner = b if a == k else a
                    else:
                        rest *= float(np.sum(lam * vectors[a] * vectors[b]))
                g += rest * lam * vectors[partner]
            return g
        raise ValueError(self.kind)

    def dense(self, dims: Sequence[int]) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(tuple(dims))
        if self.kind == "diagonal":
            out = np.zeros(tuple(dims))
            m = len(self.diag)
            out[np.arange(m), np.arange(m)] = self.diag
            return out
        if self.kind == "wick":
            out = np.zeros(tuple(dims))
            if self.order % 2 == 1:
                return out
            lam = np.asarray(self.eigenvalues)
            for pairing in _pairings(list(range(self.order))):
                block = np.array(1.0)
                axes = []
                for a, b in pairing:
                    block = np.multiply.outer(block, np.diag(lam))
                    axes.extend([a, b])
                out += np.moveaxis(block, range(len(axes)), axes)
            return out
        raise ValueError(self.kind)


@dataclass(frozen=True)
class RankOneSum:
    """Sampled dataset {X_i^(k)} representing the deviation tensor implicitly.

    ``vectors[k]`` is the (N, d_k) sample matrix of component k.  The
    multilinear form evaluated here is the empirical average minus the
    population form.
    """

    vectors: tuple[np.ndarray, ...]
    population: PopulationSpec

    def __post_init__(self) -> None:
        n = self.vectors[0].shape[0]
        if any(v.shape[0] != n for v in self.vectors):
            raise ValueError("all components must have the same sample count")

    @property
    def p(self) -> int:
        return len(self.vectors)

    @property
    def n(self) -> int:
        return self.vectors[0].shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(v.shape[1] for v in self.vectors)


def _direction_vectors(direction) -> list[np.ndarray]:
    if isinstance(direction, Direction):
        return [np.asarray(v, dtype=np.float64) for v in direction.vectors]
    return [np.asarray(v, dtype=np.float64) for v in direction]


def evaluate_form(T: RankOneSum, direction) -> float:
    """Empirical form minus population form at the given direction.

    Accepts a Direction or any sequence of vectors (multilinearity holds
    for non-unit probes too).  Summation over samples uses numpy's pairwise
    reduction in fixed index order.
    """
    vs = _direction_vectors(direction)
    if len(vs) != T.p:
        raise ValueError(f"expected {T.p} direction vectors, got {len(vs)}")
    for k, v in enumerate(vs):
        if v.shape[0] != T.dims[k]:
            raise ValueError(f"slot {k}: dimension mismatch {v.shape[0]} vs {T.dims[k]}")
    prods = np.ones(T.n)
    for k, v in enumerate(vs):
        prods = prods * (T.vectors[k] @ v)
    return float(np.mean(prods)) - T.population.form(vs)


def wick_population_form(spectrum, direction, p: int) -> float:
    """Gaussian moment E <X,v_1>...<X,v_p> for X ~ N(0, diag(spectrum)).

    Evaluated as a sum over perfect pairings; zero for odd p.  Guarded to
    p <= 8 (pairing count grows as (p-1)!!).
    """
    lam = np.asarray(getattr(spectrum, "eigenvalues", spectrum), dtype=np.float64)
    vs = _direction_vectors(direction)
    if len(vs) != p:
        raise ValueError(f"expected {p} direction vectors, got {len(vs)}")
    if p % 2 == 1:
        return 0.0
    if p > MAX_WICK_ORDER:
        raise ValueError(f"pairing sum guard: order {p} exceeds {MAX_WICK_ORDER}")
    pop = PopulationSpec.wick(lam, p)
    return pop.form(vs)


class MatrixNormResult(NamedTuple):
    value: float
    converged: bool


def _deviation_matrix(T: RankOneSum) -> np.ndarray:
    X1, X2 = T.vectors
    emp = (X1.T @ X2) / T.n
    if T.population.kind == "zero":
        return emp
    return emp - T.population.dense(T.dims)


def matrix_operator_norm(T: RankOneSum, tol: float = 1e-10, max_iter: int = 20000,
                         rng: np.random.Generator | None = None) -> MatrixNormResult:
    """Largest singular value of the p = 2 deviation matrix.

    Power iteration on M^T M with a residual stopping rule, deterministic
    all-ones start plus one random restart.  Non-convergence returns the
    best value so far with the flag lowered.
    """
    if T.p != 2:
        raise ValueError("matrix_operator_norm requires p = 2")
    M = _deviation_matrix(T)
    G = M.T @ M
    d = G.shape[0]
    if rng is None:
        rng = np.random.default_rng(0xC0FFEE)

    def run(w0: np.ndarray) -> tuple[float, bool]:
        w = _unit(w0)
        lam = 0.0
        for _ in range(max_iter):
            z = G @ w
            lam = float(w @ z)
            resid = float(np.linalg.norm(z - lam * w))
            if resid <= tol * max(lam, 1e-300):
                return math.sqrt(max(lam, 0.0)), True
            znorm = float(np.linalg.norm(z))
            if znorm == 0.0:
                return 0.0, True
            w = z / znorm
        return math.sqrt(max(lam, 0.0)), False

    results = [run(np.ones(d)), run(rng.standard_normal(d))]
    value, converged = max(results, key=lambda r: r[0])
    return MatrixNormResult(value, converged)


class RestartOutcome(NamedTuple):
    value: float
    converged: bool
    sweeps: int
    reseeds: int


@dataclass(frozen=True)
class SolverResult:
    value: float
    direction: Direction
    restarts: tuple[RestartOutcome, ...]
    best_index: int

    @property
    def converged(self) -> bool:
        return self.restarts[self.best_index].converged

    @property
    def converged_fraction(self) -> float:
        return sum(r.converged for r in self.restarts) / len(self.restarts)

    @property
    def total_reseeds(self) -> int:
        return sum(r.reseeds for r in self.restarts)


def _initial_directions(T: RankOneSum, restarts: int, rng: np.random.Generator) -> list[list[np.ndarray]]:
    """Warm start from per-component top singular directions, then random."""
    inits = []
    warm = []
    for X in T.vectors:
        _, _, vt = np.linalg.svd(X, full_matrices=False)
        warm.append(vt[0].copy())
    inits.append(warm)
    for _ in range(restarts - 1):
        inits.append([_unit(rng.standard_normal(d)) for d in T.dims])
    return inits


def _random_direction(T: RankOneSum, rng: np.random.Generator) -> list[np.ndarray]:
    return [_unit(rng.standard_normal(d)) for d in T.dims]


def _alternating_ascent(T: RankOneSum, init: list[np.ndarray], update, objective,
                        tol: float, max_sweeps: int, max_reseeds: int,
                        rng: np.random.Generator) -> tuple[float, list[np.ndarray], bool, int, int]:
    """Generic block-coordinate ascent loop with degenerate-restart policy.

    ``update(vs, k)`` returns the optimal unit vector for slot k (or None
    when the subproblem is degenerate); ``objective(vs)`` is the maximized
    scalar.  The objective is monotone non-decreasing across sweeps.
    """
    vs = [v.copy() for v in init]
    reseeds = 0
    value = objective(vs)
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        sweeps += 1
        degenerate = False
        for k in range(T.p):
            new_vk = update(vs, k)
            if new_vk is None:
                degenerate = True
                break
            vs[k] = new_vk
        if degenerate:
            if reseeds >= max_reseeds:
                break
            reseeds += 1
            vs = _random_direction(T, rng)
            value = objective(vs)
            continue
        new_value = objective(vs)
        if new_value - value <= tol * max(1.0, new_value):
            value = max(value, new_value)
            converged = True
            break
        value = new_value
    return value, vs, converged, sweeps, reseeds


def _best_over_restarts(T: RankOneSum, restarts: int, rng: np.random.Generator,
                        update, objective, tol: float, max_sweeps: int) -> SolverResult:
    outcomes = []
    best_index, best_dirs = 0, None
    for init in _initial_directions(T, restarts, rng):
        value, vs, conv, sweeps, reseeds = _alternating_ascent(
            T, init, update, objective, tol, max_sweeps, max_reseeds=5, rng=rng)
        outcomes.append(RestartOutcome(value, conv, sweeps, reseeds))
        # strict inequality: ties broken by lowest restart index
        if best_dirs is None or value > outcomes[best_index].value:
            best_index = len(outcomes) - 1
            best_dirs = vs
    return SolverResult(outcomes[best_index].value, Direction.normalized(best_dirs),
                        tuple(outcomes), best_index)


def hopm_operator_norm(T: RankOneSum, restarts: int = DEFAULT_RESTARTS, tol: float = 1e-12,
                       max_sweeps: int = 500, stream: SeededStream | None = None,
                       rng: np.random.Generator | None = None) -> SolverResult:
    """Best |form| over restarts of alternating rank-one maximization.

    The slot-k update aligns v_k with the gradient of the form (empirical
    part minus population part) holding the other slots fixed, which
    maximizes |form| over the unit sphere in that slot.  Restart winners
    are merged by argmax with ties broken by lowest restart index.
    """
    if T.p < 2:
        raise ValueError("hopm_operator_norm requires p >= 2")
    if rng is None:
        rng = (stream or SeededStream(0, experiment_id="hopm")).generator()

    def gradient(vs: list[np.ndarray], k: int) -> np.ndarray:
        prods = np.ones(T.n)
        for kk in range(T.p):
            if kk != k:
                prods = prods * (T.vectors[kk] @ vs[kk])
        g = (T.vectors[k].T @ prods) / T.n
        return g - T.population.gradient(vs, k)

    def update(vs: list[np.ndarray], k: int):
        g = gradient(vs, k)
        nrm = float(np.linalg.norm(g))
        if nrm <= 1e-300:
            return None
        return g / nrm

    def objective(vs: list[np.ndarray]) -> float:
        return abs(evaluate_form(T, vs))

    return _best_over_restarts(T, restarts, rng, update, objective, tol, max_sweeps)


def projection_product_sup(T: RankOneSum, restarts: int = DEFAULT_RESTARTS, tol: float = 1e-12,
                  max_sweeps: int = 500, stream: SeededStream | None = None,
                  rng: np.random.Generator | None = None) -> SolverResult:
    """sup over unit v_k of sqrt(sum_i prod_k <X_i^(k), v_k>^2).

    Alternating eigen-maximization: with the other slots fixed, the optimal
    v_k is the leading eigenvector of sum_i w_i X_i^(k) X_i^(k)^T with
    w_i the product of the squared projections over the other slots.
    """
    if T.p < 1:
        raise ValueError("projection_product_sup requires p >= 1")
    if rng is None:
        rng = (stream or SeededStream(0, experiment_id="projsup")).generator()

    def weights(vs: list[np.ndarray], k: int) -> np.ndarray:
        w = np.ones(T.n)
        for kk in range(T.p):
            if kk != k:
                w = w * (T.vectors[kk] @ vs[kk]) ** 2
        return w

    def update(vs: list[np.ndarray], k: int):
        w = weights(vs, k)
        if not np.any(w > 0.0):
            return None
        Xk = T.vectors[k]
        M = (Xk * w[:, None]).T @ Xk
        evals, evecs = np.linalg.eigh(M)
        return evecs[:, -1].copy()

    def objective(vs: list[np.ndarray]) -> float:
        prods = np.ones(T.n)
        for k in range(T.p):
            prods = prods * (T.vectors[k] @ vs[k]) ** 2
        return math.sqrt(float(np.sum(prods)))

    return _best_over_restarts(T, restarts, rng, update, objective, tol, max_sweeps)


@dataclass(frozen=True)
class DenseTensor:
    """Explicit tensor for oracle-scale work (prod(dims) <= 1e6)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.size > MAX_DENSE_ENTRIES:
            raise ValueError(f"dense tensor exceeds {MAX_DENSE_ENTRIES} entries")

    @classmethod
    def from_rank_one_sum(cls, T: RankOneSum) -> "DenseTensor":
        if int(np.prod(T.dims)) > MAX_DENSE_ENTRIES:
            raise ValueError("densification budget exceeded")
        letters = "abcdefgh"[: T.p]
        subscripts = ",".join(f"i{c}" for c in letters) + "->" + letters
        emp = np.einsum(subscripts, *T.vectors) / T.n
        return cls(emp - T.population.dense(T.dims))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.values.shape

    def form(self, direction) -> float:
        vs = _direction_vectors(direction)
        out = self.values
        for v in vs:
            out = np.tensordot(out, v, axes=(0, 0))
        return float(out)


def _sphere_net(d: int, step: float) -> np.ndarray:
    """Net on the unit sphere of R^d with geodesic covering radius <= step.

    d = 1: both points, exact.  d = 2: uniform angle grid.  d = 3: rings of
    latitude (polar offset <= step/2, in-ring arc <= step/2).
    """
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        m = max(4, int(math.ceil(2.0 * math.pi / step)))
        th = 2.0 * math.pi * np.arange(m) / m
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if d == 3:
        n_pol = max(2, int(math.ceil(math.pi / step)))
        rows = []
        for i in range(n_pol):
            theta = (i + 0.5) * math.pi / n_pol
            st, ct = math.sin(theta), math.cos(theta)
            m = max(1, int(math.ceil(2.0 * math.pi * st / step)))
            phi = 2.0 * math.pi * np.arange(m) / m
            rows.append(np.stack([st * np.cos(phi), st * np.sin(phi), np.full(m, ct)], axis=1))
        return np.concatenate(rows, axis=0)
    raise NetBudgetError(f"sphere nets are certified only for d <= 3, got d = {d}")


def net_oracle_norm(T: DenseTensor, angular_step: float) -> float:
    """Certified small-scale operator norm via a sphere net.

    Nets the smallest slot and solves the remaining slots exactly (norm
    for p = 2, top singular value for p = 3), so the returned max is
    within angular_step * (true norm) of the truth by multilinear
    Lipschitz continuity, well inside the p * angular_step guarantee.
    """
    dims = T.dims
    p = len(dims)
    if p > 3:
        raise NetBudgetError("net oracle supports p <= 3")
    if T.values.size > MAX_NET_ENTRIES:
        raise NetBudgetError(f"net oracle supports at most {MAX_NET_ENTRIES} entries")
    if angular_step > MAX_NET_STEP:
        raise ValueError(f"angular_step must be <= {MAX_NET_STEP}")

    if p == 1:
        return float(np.linalg.norm(T.values))

    axis = int(np.argmin(dims))
    values = np.moveaxis(T.values, axis, 0)
    net = _sphere_net(dims[axis], angular_step)

    if p == 2:
        hits = net @ values  # (net, d_other)
        return float(np.max(np.linalg.norm(hits, axis=1)))

    slabs = np.tensordot(net, values, axes=(1, 0))  # (net, d_b, d_c)
    # chunk to bound peak memory of the batched SVD
    best = 0.0
    chunk = 65536
    for start in range(0, slabs.shape[0], chunk):
        sv = np.linalg.svd(slabs[start : start + chunk], compute_uv=False)
        best = max(best, float(sv[:, 0].max()))
    return best

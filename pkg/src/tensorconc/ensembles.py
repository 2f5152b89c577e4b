"""Component random-vector ensembles with prescribed covariance spectra.

Covariances are represented diagonally: the studied statistics (operator
norms, traces, effective ranks) are rotation invariant, so sampling with a
diagonal covariance loses no generality and avoids dense factorizations.
Coordinates are independent scaled one-dimensional draws, so coordinate j
of a sample has variance ``lambda_j`` exactly for every family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import optimize, special

from .streams import SeededStream

__all__ = [
    "GAUSSIAN_PSI2",
    "SpectrumSpec",
    "ComponentEnsemble",
    "CorrelationMode",
    "UnsupportedFamilyError",
    "effective_rank",
    "sample_batch",
    "subgaussian_norm_1d",
]

# psi2 norm of a standard Gaussian: the exact root of (1 - 2/c^2)^(-1/2) = 2.
GAUSSIAN_PSI2 = math.sqrt(8.0 / 3.0)

FAMILIES = ("gaussian", "scaled_rademacher", "uniform_cube", "laplace_isotropic")


class UnsupportedFamilyError(ValueError):
    """Raised when an operation does not apply to the requested family."""


@dataclass(frozen=True)
class SpectrumSpec:
    """Eigenvalue profile of a diagonal covariance operator.

    Eigenvalues are strictly positive and sorted non-increasing; ``kind``
    is a display label recording how the profile was built.
    """

    eigenvalues: tuple[float, ...]
    kind: str = "explicit"

    def __post_init__(self) -> None:
        lam = self.eigenvalues
        if len(lam) == 0:
            raise ValueError("spectrum needs at least one eigenvalue")
        if any(not (x > 0.0) for x in lam):
            raise ValueError("eigenvalues must be strictly positive")
        if any(lam[i] < lam[i + 1] for i in range(len(lam) - 1)):
            raise ValueError("eigenvalues must be sorted non-increasing")

    @classmethod
    def identity(cls, dim: int) -> "SpectrumSpec":
        return cls((1.0,) * int(dim), kind="identity")

    @classmethod
    def geometric(cls, dim: int, ratio: float) -> "SpectrumSpec":
        if not 0.0 < ratio < 1.0:
            raise ValueError("geometric ratio must lie in (0, 1)")
        return cls(tuple(ratio**j for j in range(int(dim))), kind="geometric")

    @classmethod
    def polynomial(cls, dim: int, exponent: float) -> "SpectrumSpec":
        if exponent <= 0.0:
            raise ValueError("polynomial exponent must be positive")
        return cls(tuple((j + 1.0) ** -exponent for j in range(int(dim))), kind="polynomial")

    @classmethod
    def explicit(cls, values) -> "SpectrumSpec":
        return cls(tuple(float(v) for v in values), kind="explicit")

    @cached_property
    def array(self) -> np.ndarray:
        return np.asarray(self.eigenvalues, dtype=np.float64)

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    @property
    def operator_norm(self) -> float:
        return self.eigenvalues[0]

    @property
    def trace(self) -> float:
        return float(sum(self.eigenvalues))

    @property
    def is_identity(self) -> bool:
        return all(x == 1.0 for x in self.eigenvalues)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "eigenvalues": list(self.eigenvalues)}

    @classmethod
    def from_dict(cls, data: dict) -> "SpectrumSpec":
        return cls(tuple(float(v) for v in data["eigenvalues"]), kind=data.get("kind", "explicit"))


def effective_rank(spectrum: SpectrumSpec) -> float:
    """Trace over operator norm; lies in [1, dim]."""
    return spectrum.trace / spectrum.operator_norm


@dataclass(frozen=True)
class ComponentEnsemble:
    """One tensor factor: dimension, covariance spectrum, distribution family."""

    dim: int
    spectrum: SpectrumSpec
    family: str = "gaussian"

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise UnsupportedFamilyError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.dim != self.spectrum.dim:
            raise ValueError(f"dim {self.dim} does not match spectrum dim {self.spectrum.dim}")
        if self.family == "laplace_isotropic" and not self.spectrum.is_identity:
            raise UnsupportedFamilyError("laplace_isotropic requires an identity spectrum")

    def to_dict(self) -> dict:
        return {"dim": self.dim, "family": self.family, "spectrum": self.spectrum.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "ComponentEnsemble":
        return cls(int(data["dim"]), SpectrumSpec.from_dict(data["spectrum"]), data.get("family", "gaussian"))


@dataclass(frozen=True)
class CorrelationMode:
    """Coupling across the p components of one sample.

    ``shared_core`` mixes a fraction ``share`` of a common Gaussian core
    into every component; marginal covariances are unchanged for any
    share value.
    """

    kind: str = "independent"
    share: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("independent", "shared_core"):
            raise ValueError(f"unknown correlation mode {self.kind!r}")
        if self.kind == "independent" and self.share != 0.0:
            raise ValueError("independent mode takes no share parameter")
        if not 0.0 <= self.share <= 1.0:
            raise ValueError("share must lie in [0, 1]")

    @classmethod
    def independent(cls) -> "CorrelationMode":
        return cls("independent", 0.0)

    @classmethod
    def shared_core(cls, share: float) -> "CorrelationMode":
        return cls("shared_core", float(share))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "share": self.share}

    @classmethod
    def from_dict(cls, data: dict) -> "CorrelationMode":
        return cls(data.get("kind", "independent"), float(data.get("share", 0.0)))


def _family_draw(family: str, lam: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """(n, d) array of independent coordinates, coordinate j with variance lam[j]."""
    d = lam.shape[0]
    scale = np.sqrt(lam)
    if family == "gaussian":
        return rng.standard_normal((n, d)) * scale
    if family == "scaled_rademacher":
        return (2.0 * rng.integers(0, 2, size=(n, d)) - 1.0) * scale
    if family == "uniform_cube":
        # uniform on [-a, a] has variance a^2/3
        return rng.uniform(-1.0, 1.0, size=(n, d)) * (scale * math.sqrt(3.0))
    if family == "laplace_isotropic":
        return rng.laplace(0.0, 1.0 / math.sqrt(2.0), size=(n, d))
    raise UnsupportedFamilyError(family)


def sample_batch(ensembles, corr: CorrelationMode, n: int, stream: SeededStream):
    """Draw n i.i.d. samples per component and wrap them as a RankOneSum.

    Re-calling with the same stream reproduces bit-identical output.  The
    population tensor attached to the result covers the analytically known
    cases; other couplings are rejected.
    """
    from .deviation import PopulationSpec, RankOneSum

    ensembles = tuple(ensembles)
    p = len(ensembles)
    if p < 1:
        raise ValueError("need at least one component ensemble")
    if n < 1:
        raise ValueError("need at least one sample")

    theta = corr.share if corr.kind == "shared_core" else 0.0
    vectors = []
    if theta == 0.0:
        for k, ens in enumerate(ensembles):
            rng = stream.component(k).generator()
            vectors.append(_family_draw(ens.family, ens.spectrum.array, n, rng))
    else:
        dmax = max(ens.dim for ens in ensembles)
        core = stream.component("core").generator().standard_normal((n, dmax))
        for k, ens in enumerate(ensembles):
            lam = ens.spectrum.array
            rng = stream.component(k).generator()
            own = _family_draw(ens.family, lam, n, rng)
            shared = core[:, : ens.dim] * np.sqrt(lam)
            vectors.append(math.sqrt(theta) * shared + math.sqrt(1.0 - theta) * own)

    population = _population_for(ensembles, theta)
    return RankOneSum(tuple(vectors), population)


def _population_for(ensembles, theta: float):
    """Population tensor of the sampled law, in the analytically known cases."""
    from .deviation import PopulationSpec

    p = len(ensembles)
    if theta == 0.0 or p == 1:
        return PopulationSpec.zero()
    if p == 2:
        lam1 = ensembles[0].spectrum.array
        lam2 = ensembles[1].spectrum.array
        m = min(lam1.shape[0], lam2.shape[0])
        return PopulationSpec.diagonal(theta * np.sqrt(lam1[:m] * lam2[:m]))
    if p % 2 == 1:
        # all families are symmetric and the core is Gaussian, so every
        # odd-order cross moment vanishes
        return PopulationSpec.zero()
    spectra = {ens.spectrum.eigenvalues for ens in ensembles}
    if theta == 1.0 and len(spectra) == 1:
        # components coincide and are exactly Gaussian (core-driven)
        return PopulationSpec.wick(ensembles[0].spectrum.array, p)
    raise ValueError(
        "population tensor is not analytically available for shared_core "
        f"with share={theta} and p={p}; supported: independent, p=2, odd p, "
        "or share=1 with equal spectra"
    )


def subgaussian_norm_1d(family: str, variance: float) -> float:
    """psi2 norm of a one-dimensional marginal with the given variance.

    Closed form for Gaussian and Rademacher; numeric root-find on the
    defining expectation for the uniform family (relative tolerance 1e-6).
    """
    if variance <= 0.0:
        raise ValueError("variance must be positive")
    sigma = math.sqrt(variance)
    if family == "gaussian":
        return GAUSSIAN_PSI2 * sigma
    if family == "scaled_rademacher":
        # |X| = sigma a.s., so E exp(X^2/c^2) = exp(sigma^2/c^2) = 2
        return sigma / math.sqrt(math.log(2.0))
    if family == "uniform_cube":
        a = math.sqrt(3.0) * sigma

        def excess(c: float) -> float:
            # E exp(X^2/c^2) = (c/a) * (sqrt(pi)/2) * erfi(a/c) for X ~ U[-a, a]
            return (c / a) * (math.sqrt(math.pi) / 2.0) * float(special.erfi(a / c)) - 2.0

        lo, hi = 0.25 * a, 4.0 * a
        while excess(lo) < 0.0:
            lo *= 0.5
        while excess(hi) > 0.0:
            hi *= 2.0
        return float(optimize.brentq(excess, lo, hi, rtol=1e-9))
    if family == "laplace_isotropic":
        raise UnsupportedFamilyError("laplace_isotropic is not sub-Gaussian; psi1 applies instead")
    raise UnsupportedFamilyError(family)

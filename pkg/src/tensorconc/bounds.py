"""Closed-form deviation rates, regime classification, and related bounds.

All displayed rates carry unspecified absolute constants in the theory;
reported values set those constants to 1 and the Monte Carlo harness
estimates the true ratios empirically.  log means natural logarithm
throughout.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

from .ensembles import SpectrumSpec, effective_rank

__all__ = [
    "RegimeReport",
    "deviation_rate",
    "tensor_deviation_bound",
    "classify_regime",
    "log_concave_bound",
    "multiproduct_bound",
]


def _ranks(spectra: Sequence[SpectrumSpec], n: int) -> list[float]:
    if n < 2:
        raise ValueError("need n >= 2 so that log n > 0")
    if len(spectra) < 2:
        raise ValueError("need at least two components")
    return [effective_rank(s) for s in spectra]


def deviation_rate(spectra: Sequence[SpectrumSpec], n: int) -> float:
    """Dimension-free rate sqrt(sum_k r_k / n) + prod_k sqrt(r_k + log n) / n."""
    ranks = _ranks(spectra, n)
    log_n = math.log(n)
    first = math.sqrt(sum(ranks) / n)
    second = math.prod(math.sqrt(r + log_n) for r in ranks) / n
    return first + second


def tensor_deviation_bound(spectra: Sequence[SpectrumSpec], n: int) -> float:
    """Expected-deviation bound: prod_k ||Sigma_k||^(1/2) times the rate."""
    scale = math.prod(math.sqrt(s.operator_norm) for s in spectra)
    return scale * deviation_rate(spectra, n)


@dataclass(frozen=True)
class RegimeReport:
    """Which effective ranks sit above the log n threshold, and the two
    simplified-rate terms that follow from that split."""

    ranks: tuple[float, ...]  # sorted non-increasing
    log_n: float
    t: int  # count of ranks >= log n (ties count in)
    sqrt_term: float
    log_term: float

    @property
    def dominant(self) -> str:
        return "sqrt-term" if self.sqrt_term >= self.log_term else "log-augmented-product-term"


def classify_regime(spectra: Sequence[SpectrumSpec], n: int) -> RegimeReport:
    """Split the sorted effective ranks at log n and evaluate both terms of
    the simplified rate sqrt(r_1/n) + (log n)^((p-t)/2)/n * prod_{k<=t} sqrt(r_k).

    Invariant under permutation of the components; a rank exactly equal to
    log n counts into t (both threshold inequalities are non-strict).
    """
    ranks = sorted(_ranks(spectra, n), reverse=True)
    p = len(ranks)
    log_n = math.log(n)
    t = sum(1 for r in ranks if r >= log_n)
    sqrt_term = math.sqrt(ranks[0] / n)
    log_term = (log_n ** ((p - t) / 2.0)) * math.prod(math.sqrt(r) for r in ranks[:t]) / n
    return RegimeReport(tuple(ranks), log_n, t, sqrt_term, log_term)


def log_concave_bound(dims: Sequence[int], n: int) -> float:
    """Rate for isotropic unconditional log-concave components:
    sqrt(sum_k d_k / n) + prod_k (sqrt(d_k) + log n) / n."""
    if n < 2:
        raise ValueError("need n >= 2 so that log n > 0")
    if len(dims) < 2:
        raise ValueError("need at least two components")
    log_n = math.log(n)
    first = math.sqrt(sum(dims) / n)
    second = math.prod(math.sqrt(d) + log_n for d in dims) / n
    return first + second


def multiproduct_bound(gammas: Sequence[float], dpsi2: Sequence[float], n: int) -> float:
    """Finite-class bound for suprema of multi-product empirical processes.

    With normalized complexities gbar_k = gamma_k / dpsi2_k, returns
    prod_k dpsi2_k * (sum_k gbar_k / sqrt(n) + prod_k (gbar_k + sqrt(log n)) / n).
    Inputs with gbar_k < 1 are flagged: for symmetric classes the chaining
    functional dominates the psi2 diameter.
    """
    if n < 2:
        raise ValueError("need n >= 2 so that log n > 0")
    if len(gammas) != len(dpsi2) or len(gammas) < 2:
        raise ValueError("need matching gamma/diameter lists of length >= 2")
    if any(d <= 0 for d in dpsi2) or any(g < 0 for g in gammas):
        raise ValueError("diameters must be positive and gammas non-negative")
    gbar = [g / d for g, d in zip(gammas, dpsi2)]
    if any(g < 1.0 for g in gbar):
        warnings.warn("normalized complexity below 1 is suspicious for symmetric classes",
                      stacklevel=2)
    sqrt_log_n = math.sqrt(math.log(n))
    rate = sum(gbar) / math.sqrt(n) + math.prod(g + sqrt_log_n for g in gbar) / n
    return math.prod(dpsi2) * rate

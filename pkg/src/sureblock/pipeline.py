"""Level-by-level wavelet regression: DWT, per-level shrinkage, inverse DWT."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import dwt
from .shrinkage import (
    Branch,
    SureSelection,
    block_js,
    minimize_sure,
    sparsity_cutoff,
    sparsity_statistic,
    sure,
    sureblock_estimate,
)

log = logging.getLogger(__name__)

# BlockJS per-block threshold is this constant times the block size
BLOCKJS_CONSTANT = 4.50524
MAD_SCALE = 0.6745


class Method(enum.Enum):
    SUREBLOCK = "sureblock"
    VISUSHRINK = "visu"
    SURESHRINK = "sureshrink"
    BLOCKJS = "blockjs"
    SUREGARROTE = "garrote"

    @classmethod
    def parse(cls, value: "str | Method") -> "Method":
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        for m in cls:
            if key in (m.value, m.name.lower()):
                return m
        raise ValueError(f"unknown method {value!r}; choose from {[m.value for m in cls]}")


@dataclass(frozen=True)
class DenoiseConfig:
    """How to denoise: wavelet, primary level, shrinkage rule and noise level.

    ``sigma=None`` estimates the noise level from the finest detail level.
    ``lambda_override`` pins the threshold of the SureBlock rule at every level
    (block sizes are still searched); it exists for plumbing checks.
    """

    filter: str = "sym8"
    j0: int = 3
    method: Method = Method.SUREBLOCK
    sigma: float | None = None
    lambda_override: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        dwt.get_filter(self.filter)
        if self.j0 < 1:
            raise ValueError(f"j0 must be >= 1, got {self.j0}")
        if self.sigma is not None and not self.sigma >= 0:
            raise ValueError(f"fixed sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class LevelReport:
    """What the rule did at one level; thresholds are in standardized units."""

    level: int
    coeff_count: int
    branch: str
    block_size: int
    threshold: float
    sure_value: float = math.nan
    selection: SureSelection | None = None


@dataclass
class DenoiseReport:
    estimate: np.ndarray
    sigma_hat: float
    per_level: list[LevelReport] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    pyramid: dwt.CoefficientPyramid | None = None


def estimate_sigma(pyramid: dwt.CoefficientPyramid, n: int | None = None) -> float:
    """MAD noise estimate from the finest detail level, in sample-domain units."""
    n = pyramid.n if n is None else n
    finest = pyramid.detail[-1]
    if finest.size == 0:
        raise ValueError("finest detail level is empty")
    return float(np.median(np.abs(np.sqrt(n) * finest)) / MAD_SCALE)


def soft_threshold(x, t: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def soft_sure(x, t: float) -> float:
    """SURE for soft thresholding at ``t`` under unit noise."""
    a = np.abs(np.asarray(x, dtype=float))
    return float(a.size - 2.0 * np.count_nonzero(a <= t) + np.sum(np.minimum(a, t) ** 2))


def sureshrink_threshold(x) -> tuple[float, bool]:
    """Return ``(t, hybrid)``: the SURE-optimal soft threshold capped at the universal one.

    ``hybrid`` is True when the sparsity test routed the level to the universal
    threshold directly.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    universal = math.sqrt(2.0 * math.log(d))
    if d < 2 or sparsity_statistic(x) <= sparsity_cutoff(d):
        return universal, True
    a = np.sort(np.abs(x))
    cands = np.unique(np.concatenate([[0.0], a[a <= universal], [universal]]))
    # SURE(t) = d - 2 #{|x| <= t} + sum_{|x|<=t} x^2 + t^2 #{|x| > t}
    k = np.searchsorted(a, cands, side="right")
    cum = np.concatenate([[0.0], np.cumsum(a * a)])
    risk = d - 2.0 * k + cum[k] + cands * cands * (d - k)
    return float(cands[int(np.argmin(risk))]), False


def comparison_rule(x, method: Method | str, n: int) -> tuple[np.ndarray, LevelReport]:
    """Apply one shrinkage rule to standardized coefficients of a level.

    ``n`` is the full sample size; VisuShrink and BlockJS tune on it. The
    returned report has ``level`` set to -1; the caller fills it in.
    """
    method = Method.parse(method)
    x = np.asarray(x, dtype=float)
    d = x.size
    if method is Method.VISUSHRINK:
        t = math.sqrt(2.0 * math.log(n))
        return soft_threshold(x, t), LevelReport(-1, d, "UNIVERSAL", 1, t)
    if method is Method.SURESHRINK:
        t, hybrid = sureshrink_threshold(x)
        return soft_threshold(x, t), LevelReport(-1, d, "UNIVERSAL" if hybrid else "SURE", 1, t, soft_sure(x, t))
    if method is Method.BLOCKJS:
        L = min(max(1, int(math.floor(math.log(n)))), d)
        lam = BLOCKJS_CONSTANT * L
        return block_js(x, lam, L), LevelReport(-1, d, "FIXED", L, lam)
    max_block = 1 if method is Method.SUREGARROTE else None
    est, sel = sureblock_estimate(x, max_block=max_block)
    return est, LevelReport(-1, d, sel.hybrid_branch.value, sel.L_star, sel.lambda_star, sel.sure_value, sel)


def _forced_lambda(x, lam: float) -> tuple[np.ndarray, LevelReport]:
    sel = minimize_sure(x)
    value = sure(x, lam, sel.L_star)
    forced = SureSelection(sel.L_star, float(lam), value, Branch.BLOCK)
    return block_js(x, lam, sel.L_star), LevelReport(-1, x.size, Branch.BLOCK.value, sel.L_star, float(lam), value, forced)


def denoise(y, config: DenoiseConfig | None = None) -> DenoiseReport:
    """Estimate ``f`` at the sample points from ``y = f + sigma z``."""
    config = config or DenoiseConfig()
    y = np.asarray(y, dtype=float)
    n = y.size
    J = dwt.dyadic_level(n)
    if J < config.j0 + 1:
        raise ValueError(f"n={n} too short for j0={config.j0}; need n >= {2 ** (config.j0 + 1)}")
    pyramid = dwt.forward(y, config.filter, config.j0)
    sigma = estimate_sigma(pyramid, n) if config.sigma is None else float(config.sigma)
    report = DenoiseReport(estimate=y.copy(), sigma_hat=sigma, pyramid=pyramid)
    if sigma == 0.0:
        msg = "noise level is zero; returning the input unchanged"
        log.info(msg)
        report.warnings.append(msg)
        return report

    sigma_n = sigma / math.sqrt(n)
    shrunk = pyramid.copy()
    for j in pyramid.levels:
        x = pyramid.level(j) / sigma_n
        if config.lambda_override is not None and config.method is Method.SUREBLOCK:
            est, rep = _forced_lambda(x, config.lambda_override)
        else:
            est, rep = comparison_rule(x, config.method, n)
        shrunk.detail[j - pyramid.j0] = sigma_n * est
        report.per_level.append(replace(rep, level=j))
    report.estimate = dwt.inverse(shrunk, config.filter)
    return report

"""Periodized orthogonal discrete wavelet transform for dyadic-length signals.

The forward transform is applied to ``n**-0.5 * signal`` and the inverse
multiplies back by ``n**0.5``, so white noise of level ``sigma`` in the
sample domain shows up with standard deviation ``sigma / sqrt(n)`` on every
coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "WaveletFilter",
    "CoefficientPyramid",
    "HAAR",
    "SYM8",
    "FILTERS",
    "get_filter",
    "dyadic_level",
    "forward",
    "inverse",
]


@dataclass(frozen=True)
class WaveletFilter:
    """Orthonormal quadrature mirror filter pair, stored as its lowpass half."""

    name: str
    lowpass: tuple[float, ...]

    def __post_init__(self):
        if len(self.lowpass) == 0 or len(self.lowpass) % 2:
            raise ValueError(f"filter {self.name!r} must have an even, positive number of taps")

    @property
    def length(self) -> int:
        return len(self.lowpass)

    @property
    def h(self) -> np.ndarray:
        return np.asarray(self.lowpass, dtype=float)

    @property
    def g(self) -> np.ndarray:
        # alternating-sign mirror: g[k] = (-1)^k h[L-1-k]
        h = self.h
        return h[::-1] * (-1.0) ** np.arange(h.size)

    def check(self, tol: float = 1e-10) -> None:
        """Raise ``ValueError`` unless the taps are admissible and orthonormal."""
        h = self.h
        if abs(h.sum() - np.sqrt(2.0)) > tol:
            raise ValueError(f"{self.name}: taps sum to {h.sum()!r}, expected sqrt(2)")
        for m in range(h.size // 2):
            inner = float(np.dot(h[: h.size - 2 * m], h[2 * m:]))
            target = 1.0 if m == 0 else 0.0
            if abs(inner - target) > tol:
                raise ValueError(f"{self.name}: even-shift inner product at 2*{m} is {inner!r}")


HAAR = WaveletFilter("haar", (0.7071067811865476, 0.7071067811865476))

# Least-asymmetric Daubechies filter with 8 vanishing moments (Symmlet 8).
SYM8 = WaveletFilter(
    "sym8",
    (
        0.0018899503327594609,
        -0.0003029205147213668,
        -0.01495225833704823,
        0.003808752013890615,
        0.04913717967360752,
        -0.027219029917056003,
        -0.05194583810770904,
        0.3644418948353314,
        0.7771857517005235,
        0.4813596512583722,
        -0.06127335906765891,
        -0.1432942383508097,
        0.007607487324917605,
        0.03169508781149298,
        -0.0005421323317911481,
        -0.0033824159510061256,
    ),
)

FILTERS = {f.name: f for f in (HAAR, SYM8)}


def get_filter(name: str | WaveletFilter) -> WaveletFilter:
    if isinstance(name, WaveletFilter):
        return name
    try:
        return FILTERS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown wavelet {name!r}; choose from {sorted(FILTERS)}") from None


@dataclass
class CoefficientPyramid:
    """Coarse scaling coefficients at level ``j0`` plus details for levels ``j0..J-1``.

    ``detail[i]`` holds the ``2**(j0 + i)`` coefficients of level ``j0 + i``.
    """

    j0: int
    J: int
    coarse: np.ndarray
    detail: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.coarse = np.asarray(self.coarse, dtype=float)
        self.detail = [np.asarray(d, dtype=float) for d in self.detail]
        if not 0 <= self.j0 < self.J:
            raise ValueError(f"need 0 <= j0 < J, got j0={self.j0}, J={self.J}")
        if self.coarse.shape != (2 ** self.j0,):
            raise ValueError(f"coarse block has {self.coarse.size} entries, expected {2 ** self.j0}")
        if len(self.detail) != self.J - self.j0:
            raise ValueError(f"expected {self.J - self.j0} detail levels, got {len(self.detail)}")
        for j, d in zip(self.levels, self.detail):
            if d.shape != (2 ** j,):
                raise ValueError(f"level {j} has {d.size} coefficients, expected {2 ** j}")

    @property
    def n(self) -> int:
        return 2 ** self.J

    @property
    def levels(self) -> range:
        return range(self.j0, self.J)

    def level(self, j: int) -> np.ndarray:
        if j not in self.levels:
            raise KeyError(f"level {j} outside {self.j0}..{self.J - 1}")
        return self.detail[j - self.j0]

    def to_vector(self) -> np.ndarray:
        """Flatten coarse-first, then details by ascending level."""
        return np.concatenate([self.coarse, *self.detail])

    @classmethod
    def from_vector(cls, vec, j0: int) -> "CoefficientPyramid":
        vec = np.asarray(vec, dtype=float)
        J = dyadic_level(vec.size)
        detail = [vec[2 ** j: 2 ** (j + 1)].copy() for j in range(j0, J)]
        return cls(j0, J, vec[: 2 ** j0].copy(), detail)

    def copy(self) -> "CoefficientPyramid":
        return CoefficientPyramid(self.j0, self.J, self.coarse.copy(), [d.copy() for d in self.detail])

    def energy(self) -> float:
        return float(np.sum(self.coarse ** 2) + sum(np.sum(d ** 2) for d in self.detail))


def dyadic_level(n: int) -> int:
    """Return J with ``n == 2**J``; raise ``ValueError`` otherwise."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"signal length {n} is not a power of two")
    return n.bit_length() - 1


@lru_cache(maxsize=128)
def _wrap_index(length: int, taps: int) -> np.ndarray:
    # row k holds indices (2k + m) mod length, m = 0..taps-1
    idx = 2 * np.arange(length // 2)[:, None] + np.arange(taps)[None, :]
    idx %= length
    idx.setflags(write=False)
    return idx


def _analysis_step(a: np.ndarray, h: np.ndarray, g: np.ndarray):
    idx = _wrap_index(a.size, h.size)
    windows = a[idx]
    return windows @ h, windows @ g


def _synthesis_step(approx: np.ndarray, det: np.ndarray, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    length = 2 * approx.size
    idx = _wrap_index(length, h.size)
    contrib = np.outer(approx, h) + np.outer(det, g)
    return np.bincount(idx.ravel(), weights=contrib.ravel(), minlength=length)


def forward(signal, filt: str | WaveletFilter = "sym8", j0: int = 3) -> CoefficientPyramid:
    """Orthogonal periodized DWT of ``n**-0.5 * signal`` down to level ``j0``."""
    filt = get_filter(filt)
    y = np.asarray(signal, dtype=float)
    if y.ndim != 1:
        raise ValueError("signal must be one-dimensional")
    J = dyadic_level(y.size)
    if not 0 <= j0 < J:
        raise ValueError(f"j0={j0} must satisfy 0 <= j0 < J={J} for n={y.size}")
    h, g = filt.h, filt.g
    approx = y / np.sqrt(y.size)
    details = []
    for _ in range(J - j0):
        approx, det = _analysis_step(approx, h, g)
        details.append(det)
    return CoefficientPyramid(j0, J, approx, details[::-1])


def inverse(pyramid: CoefficientPyramid, filt: str | WaveletFilter = "sym8") -> np.ndarray:
    """Inverse of :func:`forward`, including the ``sqrt(n)`` rescaling."""
    filt = get_filter(filt)
    h, g = filt.h, filt.g
    approx = np.asarray(pyramid.coarse, dtype=float)
    for j, det in zip(pyramid.levels, pyramid.detail):
        det = np.asarray(det, dtype=float)
        if det.size != approx.size or det.size != 2 ** j:
            raise ValueError(f"level {j}: {det.size} detail coefficients against {approx.size} approximation")
        approx = _synthesis_step(approx, det, h, g)
    return approx * np.sqrt(approx.size)

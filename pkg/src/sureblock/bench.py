"""Simulation harness: test signals, seeded noise, error metrics and the method grid."""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dwt
from .pipeline import DenoiseConfig, Method, denoise

log = logging.getLogger(__name__)

CANONICAL = ("blocks", "bumps", "heavisine", "doppler")
EXTRAS = ("ppoly", "spikes")
SIGNALS = CANONICAL + EXTRAS

_KNOTS = np.array([0.10, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81])
_BLOCK_HEIGHTS = np.array([4, -5, 3, -4, 5, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2])
_BUMP_HEIGHTS = np.array([4, 5, 3, 4, 5, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2])
_BUMP_WIDTHS = np.array([0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005])


def sample_points(n: int) -> np.ndarray:
    return np.arange(1, n + 1) / n


def evaluate(name: str, t) -> np.ndarray:
    """Evaluate a named test function at points ``t`` in [0, 1]."""
    t = np.asarray(t, dtype=float)
    name = name.lower()
    if name == "blocks":
        return np.sum(_BLOCK_HEIGHTS * (1 + np.sign(t[:, None] - _KNOTS)) / 2, axis=1)
    if name == "bumps":
        return np.sum(_BUMP_HEIGHTS * (1 + np.abs((t[:, None] - _KNOTS) / _BUMP_WIDTHS)) ** -4, axis=1)
    if name == "heavisine":
        return 4 * np.sin(4 * np.pi * t) - np.sign(t - 0.3) - np.sign(0.72 - t)
    if name == "doppler":
        return np.sqrt(t * (1 - t)) * np.sin(2 * np.pi * 1.05 / (t + 0.05))
    if name == "ppoly":
        # piecewise cubic with a jump at 3/4
        return np.select(
            [t < 0.5, t < 0.75],
            [4 * t ** 2 * (3 - 4 * t), 4 / 3 * t * (4 * t ** 2 - 10 * t + 7) - 1.5],
            16 / 3 * t * (t - 1) ** 2,
        )
    if name == "spikes":
        centers = np.array([0.23, 0.33, 0.47, 0.69, 0.83])
        heights = np.array([1.0, 2.0, 4.0, 3.0, 1.0])
        rates = np.array([500.0, 2000.0, 8000.0, 16000.0, 32000.0])
        return 15.6676 * np.sum(heights * np.exp(-rates * (t[:, None] - centers) ** 2), axis=1)
    raise ValueError(f"unknown test signal {name!r}; choose from {list(SIGNALS)}")


def sample_signal(name: str, n: int) -> np.ndarray:
    """Test function ``name`` at ``t_i = i/n``, ``i = 1..n``."""
    dwt.dyadic_level(n)
    return evaluate(name, sample_points(n))


def add_noise(f_vals, snr: float, seed) -> tuple[np.ndarray, float]:
    """Add Gaussian noise with ``sd(f_vals) / snr`` standard deviation (population sd)."""
    f_vals = np.asarray(f_vals, dtype=float)
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    spread = float(np.std(f_vals))
    if spread == 0.0:
        raise ValueError("signal is constant; SNR is undefined")
    sigma = spread / snr
    z = np.random.default_rng(seed).standard_normal(f_vals.size)
    return f_vals + sigma * z, sigma


def ase(estimate, truth) -> float:
    """Average squared error over the sample grid."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(f"length mismatch: {estimate.shape} vs {truth.shape}")
    return float(np.mean((estimate - truth) ** 2))


def oracle_risk(truth, sigma: float, filt="sym8", j0: int = 3) -> float:
    """Ideal keep-or-kill risk ``sum_{j>=j0,k} min(theta_jk^2, sigma^2/n)``.

    Coefficients are in the transform's normalization, where each carries
    noise variance ``sigma^2/n``; this equals ``(1/n) sum min(n theta^2, sigma^2)``
    on ``sqrt(n)``-scaled coefficients and is directly comparable to :func:`ase`.
    """
    truth = np.asarray(truth, dtype=float)
    pyr = dwt.forward(truth, filt, j0)
    floor = sigma ** 2 / truth.size
    return float(sum(np.sum(np.minimum(d ** 2, floor)) for d in pyr.detail))


def besov_seq_norm(pyramid: dwt.CoefficientPyramid, alpha: float, p: float, q: float) -> float:
    """Besov sequence norm of a coefficient pyramid (``p`` or ``q`` may be ``inf``)."""
    if not (1 <= p <= math.inf and 1 <= q <= math.inf):
        raise ValueError("p and q must lie in [1, inf]")
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    if not alpha > max(inv_p - 0.5, 0.0):
        raise ValueError(f"alpha={alpha} too small for p={p}")
    s = alpha + 0.5 - inv_p
    weighted = np.array([2.0 ** (j * s) * np.linalg.norm(d, p) for j, d in zip(pyramid.levels, pyramid.detail)])
    tail = float(weighted.max(initial=0.0)) if math.isinf(q) else float(np.sum(weighted ** q) ** (1.0 / q))
    return float(np.linalg.norm(pyramid.coarse, p)) + tail


def cell_seed(base_seed: int, function: str, n: int, snr: float, rep: int) -> int:
    """Stateless 63-bit seed for one replication of one grid cell."""
    key = f"{base_seed}|{function}|{n}|{float(snr)!r}|{rep}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little") >> 1


@dataclass(frozen=True)
class BenchRecord:
    function: str
    n: int
    snr: float
    method: str
    rep: int
    seed: int
    ase: float
    sigma_used: float
    noise_digest: str = ""


@dataclass(frozen=True)
class ExperimentConfig:
    functions: tuple[str, ...] = CANONICAL
    ns: tuple[int, ...] = (256, 1024, 4096)
    snrs: tuple[float, ...] = (7.0,)
    methods: tuple[str, ...] = tuple(m.value for m in Method)
    reps: int = 50
    seed: int = 0
    filter: str = "sym8"
    j0: int = 3

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        for n in self.ns:
            dwt.dyadic_level(n)
        for f in self.functions:
            if f.lower() not in SIGNALS:
                raise ValueError(f"unknown test signal {f!r}")
        for m in self.methods:
            Method.parse(m)
        dwt.get_filter(self.filter)

    def cells(self):
        return [(f, n, float(s)) for f in self.functions for n in self.ns for s in self.snrs]


@dataclass(frozen=True)
class SummaryRow:
    function: str
    n: int
    snr: float
    method: str
    mean_ase: float
    ratio_to_sureblock: float


@dataclass
class ExperimentResult:
    records: list[BenchRecord]
    summary: list[SummaryRow]
    failures: list[tuple[tuple[str, int, float], str]] = field(default_factory=list)

    def mean_ase(self, function: str, n: int, snr: float, method: str) -> float:
        method = Method.parse(method).value
        for row in self.summary:
            if (row.function, row.n, row.snr, row.method) == (function, n, float(snr), method):
                return row.mean_ase
        raise KeyError((function, n, snr, method))


def run_cell(config: ExperimentConfig, function: str, n: int, snr: float) -> list[BenchRecord]:
    """All replications of one (function, n, snr) cell; methods share each noisy draw."""
    truth = sample_signal(function, n)
    methods = [Method.parse(m) for m in config.methods]
    records = []
    for rep in range(config.reps):
        seed = cell_seed(config.seed, function, n, snr, rep)
        y, _ = add_noise(truth, snr, seed)
        digest = hashlib.blake2b(y.tobytes(), digest_size=8).hexdigest()
        for method in methods:
            report = denoise(y, DenoiseConfig(config.filter, config.j0, method))
            records.append(BenchRecord(function, n, snr, method.value, rep, seed,
                                       ase(report.estimate, truth), report.sigma_hat, digest))
    return records


def _run_cell_safe(args):
    config, cell = args
    try:
        return cell, run_cell(config, *cell), None
    except Exception as exc:  # grid keeps going; failures are reported at the end
        return cell, [], f"{type(exc).__name__}: {exc}"


def summarize(records: list[BenchRecord]) -> list[SummaryRow]:
    groups: dict[tuple, list[float]] = {}
    for r in records:
        groups.setdefault((r.function, r.n, r.snr, r.method), []).append(r.ase)
    means = {k: float(np.mean(v)) for k, v in groups.items()}
    rows = []
    for key in sorted(means):
        ref = means.get(key[:3] + (Method.SUREBLOCK.value,))
        ratio = means[key] / ref if ref else math.nan
        rows.append(SummaryRow(*key, means[key], ratio))
    return rows


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Run every cell of the grid; output order is fixed by cell, replication and method."""
    cells = config.cells()
    jobs = [(config, c) for c in cells]
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell_safe, jobs))
    else:
        outcomes = [_run_cell_safe(j) for j in jobs]
    records, failures = [], []
    for cell, recs, err in outcomes:
        if err is not None:
            log.error("cell %s failed: %s", cell, err)
            failures.append((cell, err))
        records.extend(recs)
    return ExperimentResult(records, summarize(records), failures)

"""
Polynomial performance surfaces f(p, n), degree 2 in proxies p and 3 in
clients n:

    f = c00 + c10 p + c01 n + c20 p^2 + c11 p n + c02 n^2
        + c21 p^2 n + c12 p n^2 + c03 n^3
"""

import logging
from collections import defaultdict
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from ..core import COEFFICIENT_NAMES, FitError, Metric, MetricsSample, SlaModel

logger = logging.getLogger(__name__)

BASIS_SIZE = len(COEFFICIENT_NAMES)

_METRIC_FIELDS = {
    Metric.THROUGHPUT: "throughput",
    Metric.READ_LATENCY: "read_latency_avg",
    Metric.WRITE_LATENCY: "write_latency_avg",
}


def design_row(p: float, n: float) -> np.ndarray:
    """(1, p, n, p², pn, n², p²n, pn², n³)"""
    return np.array([1.0, p, n, p * p, p * n, n * n, p * p * n, p * n * n, n ** 3], dtype=np.float64)


def design_matrix(points: Sequence[Tuple[float, float]]) -> np.ndarray:
    return np.vstack([design_row(p, n) for p, n in points]) if points else np.empty((0, BASIS_SIZE))


def _deficient_columns(scaled: np.ndarray) -> List[str]:
    """Columns that add nothing to the rank of the ones before them."""
    deficient = []
    kept: List[int] = []
    for j in range(scaled.shape[1]):
        candidate = kept + [j]
        if np.linalg.matrix_rank(scaled[:, candidate]) > len(kept):
            kept.append(j)
        else:
            deficient.append(COEFFICIENT_NAMES[j])
    return deficient


def fit(samples: Iterable[Tuple[float, float, float]], metric: Metric = Metric.THROUGHPUT) -> SlaModel:
    """
    Least-squares fit of the surface to (p, n, value) samples.

    Columns are scaled to unit max-norm before an SVD-based solve, which
    keeps n³ terms for n in the hundreds well conditioned.
    """
    samples = list(samples)
    if len(samples) < BASIS_SIZE:
        raise FitError(f"Surface fit needs at least {BASIS_SIZE} samples, got {len(samples)}")

    x = design_matrix([(p, n) for p, n, _ in samples])
    y = np.array([v for _, _, v in samples], dtype=np.float64)
    scale = np.max(np.abs(x), axis=0)
    scale[scale == 0] = 1.0
    scaled = x / scale

    rank = np.linalg.matrix_rank(scaled)
    if rank < BASIS_SIZE:
        deficient = _deficient_columns(scaled)
        raise FitError(
            f"Design matrix has rank {rank} < {BASIS_SIZE}; add (p, n) points covering {', '.join(deficient)}",
            deficient,
        )

    solution, *_ = np.linalg.lstsq(scaled, y, rcond=None)
    coefficients = solution / scale
    logger.debug(f"[SLA] Fitted {metric.value} on {len(samples)} samples")
    return SlaModel(metric=metric, coefficients=tuple(coefficients))


def predict(model: SlaModel, p: float, n: float) -> float:
    """
    Evaluate a fitted surface.

    Args:
        model: Fitted coefficients for one metric.
        p: Proxy count.
        n: Client count.

    Returns:
        The predicted metric value at (p, n).
    """
    return float(design_row(p, n) @ np.asarray(model.coefficients))


def samples_for(metric: Metric, samples: Iterable[MetricsSample]) -> List[Tuple[float, float, float]]:
    """(p, n, value) points, repetitions averaged per (p, n)."""
    attr = _METRIC_FIELDS[metric]
    groups: Dict[Tuple[int, int], List[float]] = defaultdict(list)
    for sample in samples:
        groups[(sample.proxies, sample.clients)].append(getattr(sample, attr))
    return [(p, n, float(np.mean(values))) for (p, n), values in sorted(groups.items())]


def fit_from_samples(samples: Sequence[MetricsSample]) -> Dict[Metric, SlaModel]:
    """Fit all three metric surfaces from bench samples."""
    return {metric: fit(samples_for(metric, samples), metric) for metric in Metric}

import logging
from dataclasses import dataclass

import numpy as np

from odefs.data import FloatArray, IntArray

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CandidateSet:
    """Outlier candidates whose initial score strictly exceeds ``mu + a * sigma``.

    Attributes:
        indices (IntArray): Candidate object indices, ascending.
        mu (float): Mean of the initial scores.
        sigma (float): Population standard deviation of the initial scores.
        a (float): The thresholding rate.
        n (int): Number of scored objects.
    """

    indices: IntArray
    mu: float
    sigma: float
    a: float
    n: int

    @property
    def threshold(self) -> float:
        return self.mu + self.a * self.sigma

    def __len__(self) -> int:
        return len(self.indices)

    def summary(self) -> dict[str, float | int]:
        return {"n_star": len(self), "mu": self.mu, "sigma": self.sigma, "a": self.a, "threshold": self.threshold}


def select_candidates(scores: FloatArray, a: float = 2.0) -> CandidateSet:
    """
    Select outlier candidates with Cantelli's inequality.

    At most a 1 / (1 + a^2) fraction of any score vector can exceed its mean by a standard deviations, which bounds
    the share of false candidates. An empty selection is returned as is; callers that need candidates check it.

    Args:
        scores (FloatArray): Initial outlier scores, at least two and all finite.
        a (float): The thresholding rate, non-negative.

    Returns:
        CandidateSet: The strict exceedances of ``mu + a * sigma``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or len(scores) < 2:
        raise ValueError("need at least two scores")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    if a < 0:
        raise ValueError(f"a must be non-negative, got {a}")

    mu = float(scores.mean())
    sigma = float(scores.std())
    indices = np.flatnonzero(scores - mu - a * sigma > 0)

    logger.info(f"Selected {len(indices)} of {len(scores)} candidates (mu={mu:.6g}, sigma={sigma:.6g}, a={a})")
    return CandidateSet(indices=indices, mu=mu, sigma=sigma, a=a, n=len(scores))

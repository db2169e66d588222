"""Cosine similarity and Welch's two-sample t-test."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import betainc

from .errors import DegenerateVariance, DimensionMismatch, SampleTooSmall, ZeroVector


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimensions differ: {a.shape} vs {b.shape}")
    sa, sb = np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0)
    if sa == 0 or sb == 0:
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    # rescale first so tiny or huge components neither underflow nor overflow
    a, b = a / sa, b / sb
    return float(np.clip(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)), -1.0, 1.0))


def student_t_sf2(t: float, dof: float) -> float:
    """Two-sided tail probability ``P(|T| >= |t|)`` for Student's t.

    Uses the identity ``P(|T| >= t) = I_x(dof/2, 1/2)`` with
    ``x = dof / (dof + t^2)``.
    """
    if math.isinf(t):
        return 0.0
    return float(betainc(dof / 2.0, 0.5, dof / (dof + t * t)))


@dataclass(frozen=True)
class TTestResult:
    t: float
    dof: float
    p: float
    alpha: float
    reject: bool

    def __iter__(self):
        return iter((self.t, self.dof, self.p, self.reject))


def welch_t_test(sample_a: Sequence[float], sample_b: Sequence[float],
                 alpha: float = 0.05) -> TTestResult:
    """Unequal-variance t-test, two-sided, Welch-Satterthwaite dof.

    ``t`` is positive when ``sample_a`` has the larger mean. If both
    samples have zero variance but different means, ``t`` is infinite,
    ``p`` is 0 and ``dof`` falls back to ``n_a + n_b - 2``.
    """
    na, nb = len(sample_a), len(sample_b)
    if na < 2 or nb < 2:
        raise SampleTooSmall(f"each sample needs >= 2 values, got {na} and {nb}")
    ma, mb = statistics.fmean(sample_a), statistics.fmean(sample_b)
    va, vb = statistics.variance(sample_a), statistics.variance(sample_b)
    qa, qb = va / na, vb / nb
    se2 = qa + qb
    if se2 == 0:
        if ma == mb:
            raise DegenerateVariance("both samples are constant and equal")
        t = math.copysign(math.inf, ma - mb)
        return TTestResult(t, float(na + nb - 2), 0.0, alpha, True)
    t = (ma - mb) / math.sqrt(se2)
    # scale-free form: squaring tiny variances would underflow
    ra, rb = qa / max(qa, qb), qb / max(qa, qb)
    dof = (ra + rb) ** 2 / (ra ** 2 / (na - 1) + rb ** 2 / (nb - 1))
    p = student_t_sf2(t, dof)
    return TTestResult(t, dof, p, alpha, p < alpha)

"""Self-contained two-sample statistics: Welch's t and the Student-t tail.

The t CDF is evaluated through the regularized incomplete beta function with
a continued-fraction expansion (Lentz), so results are reproducible without
any numerical library and checkable against a quadrature oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import PatchEvalError


class DegenerateSample(PatchEvalError):
    """Samples too small or too flat for a meaningful t statistic."""


_BETACF_MAX_ITER = 300
_BETACF_EPS = 1e-14
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x out of range: {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # Use the expansion on the side where it converges fast.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_tailed(t: float, df: float) -> float:
    """P(|T| >= |t|) for T ~ Student-t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def student_t_sf(t: float, df: float) -> float:
    """P(T >= t), the upper tail."""
    p2 = student_t_two_tailed(t, df)
    return p2 / 2.0 if t >= 0 else 1.0 - p2 / 2.0


@dataclass
class WelchResult:
    mean_a: float
    mean_b: float
    t: float
    df: float
    p: float
    n_a: int
    n_b: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "mean_a": self.mean_a,
            "mean_b": self.mean_b,
            "t": self.t,
            "df": self.df,
            "p": self.p,
            "n_a": self.n_a,
            "n_b": self.n_b,
            "degenerate": self.degenerate,
        }


def _mean(xs: list[float]) -> float:
    return sum(xs) / len(xs)


def _variance(xs: list[float], mean: float) -> float:
    return sum((x - mean) ** 2 for x in xs) / (len(xs) - 1)


def welch_t(sample_a: list[float], sample_b: list[float]) -> WelchResult:
    """Two-sample Welch test with Welch-Satterthwaite degrees of freedom.

    Variances are unbiased (n-1). Two identical flat samples return the
    t=0, p=1 convention with the degenerate flag set.
    """
    n_a, n_b = len(sample_a), len(sample_b)
    if n_a < 2 or n_b < 2:
        raise DegenerateSample(f"need at least 2 observations per sample, got {n_a} and {n_b}")
    m_a, m_b = _mean(sample_a), _mean(sample_b)
    v_a, v_b = _variance(sample_a, m_a), _variance(sample_b, m_b)
    if not (math.isfinite(v_a) and math.isfinite(v_b)):
        raise DegenerateSample("non-finite sample variance")
    se_a, se_b = v_a / n_a, v_b / n_b
    pooled = se_a + se_b
    if pooled == 0.0:
        if m_a == m_b:
            return WelchResult(m_a, m_b, 0.0, float(n_a + n_b - 2), 1.0, n_a, n_b, degenerate=True)
        raise DegenerateSample("zero variance in both samples with different means")
    t = (m_a - m_b) / math.sqrt(pooled)
    # Scale by the larger per-sample error so the denominator cannot underflow.
    s = max(se_a, se_b)
    ra, rb = se_a / s, se_b / s
    df = (ra + rb) ** 2 / (ra * ra / (n_a - 1) + rb * rb / (n_b - 1))
    p = max(student_t_two_tailed(t, df), 5e-324) if math.isfinite(t) else 5e-324
    return WelchResult(m_a, m_b, t, df, p, n_a, n_b)

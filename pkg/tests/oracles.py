"""Independent numerical oracles used by the test suite.

These deliberately avoid the incomplete-beta code path in patcheval.stats:
the t tail probability is computed by adaptive-Simpson quadrature of the
Student-t density, using only math.lgamma.
"""

import math


def t_density(x: float, df: float) -> float:
    ln_c = math.lgamma((df + 1.0) / 2.0) - math.lgamma(df / 2.0) - 0.5 * math.log(df * math.pi)
    return math.exp(ln_c - ((df + 1.0) / 2.0) * math.log1p(x * x / df))


def _simpson(f, a: float, b: float, fa: float, fm: float, fb: float) -> float:
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive(f, a, b, fa, fm, fb, whole, tol, depth) -> float:
    m = (a + b) / 2.0
    lm, rm = (a + m) / 2.0, (m + b) / 2.0
    flm, frm = f(lm), f(rm)
    left = _simpson(f, a, m, fa, flm, fm)
    right = _simpson(f, m, b, fm, frm, fb)
    if depth <= 0 or abs(left + right - whole) < 15.0 * tol:
        return left + right + (left + right - whole) / 15.0
    return _adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + _adaptive(
        f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1
    )


def integrate(f, a: float, b: float, tol: float = 1e-12) -> float:
    fa, fb = f(a), f(b)
    m = (a + b) / 2.0
    fm = f(m)
    whole = _simpson(f, a, b, fa, fm, fb)
    return _adaptive(f, a, b, fa, fm, fb, whole, tol, 60)


def t_two_tailed_quadrature(t: float, df: float) -> float:
    """Two-tailed p via quadrature of the density over [0, |t|]."""
    t = abs(t)
    if t == 0.0:
        return 1.0
    inner = integrate(lambda x: t_density(x, df), 0.0, t)
    return max(0.0, 1.0 - 2.0 * inner)

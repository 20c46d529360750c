"""Chi-squared, noncentral chi-squared and Marcum Q via the regularized incomplete gamma.

Series below ``x < a + 1`` and a modified-Lentz continued fraction above it, the
usual split.  The noncentral distributions are Poisson mixtures of central ones,
summed outward from the Poisson mode with the incomplete gamma advanced by its
one-step recurrence, so large noncentralities cost O(sqrt(lambda)) terms.
"""

from __future__ import annotations

import math

_EPS = 1e-17
_TINY = 1e-300
_MAX_ITER = 100_000


def _log_prefactor(a: float, x: float) -> float:
    """log(x^a e^-x / Gamma(a))."""
    return a * math.log(x) - x - math.lgamma(a)


def _gamma_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(_log_prefactor(a, x))
    raise ArithmeticError(f"incomplete gamma series failed to converge (a={a}, x={x})")


def _gamma_cfrac(a: float, x: float) -> float:
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(_log_prefactor(a, x)) * h
    raise ArithmeticError(f"incomplete gamma continued fraction failed (a={a}, x={x})")


def gammainc_pq(a: float, x: float) -> tuple[float, float]:
    """Regularized lower and upper incomplete gamma ``(P(a, x), Q(a, x))``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0.0:
        return 0.0, 1.0
    if x < a + 1.0:
        p = _gamma_series(a, x)
        return p, 1.0 - p
    q = _gamma_cfrac(a, x)
    return 1.0 - q, q


def _check_dof(k: float) -> None:
    if not k > 0 or not math.isfinite(k):
        raise ValueError(f"degrees of freedom must be positive, got {k}")


def chi2_cdf(x: float, k: float) -> float:
    _check_dof(k)
    if x <= 0:
        return 0.0
    return gammainc_pq(0.5 * k, 0.5 * x)[0]


def chi2_sf(x: float, k: float) -> float:
    _check_dof(k)
    if x <= 0:
        return 1.0
    return gammainc_pq(0.5 * k, 0.5 * x)[1]


def chi2_quantile(p: float, k: float) -> float:
    """Inverse of :func:`chi2_cdf` by safeguarded Newton iteration."""
    _check_dof(k)
    if not 0.0 < p < 1.0:
        if p == 0.0:
            return 0.0
        raise ValueError("p must lie in [0, 1)")
    if k == 2.0:
        return -2.0 * math.log1p(-p)
    upper = p > 0.5
    target = 1.0 - p if upper else p
    # Wilson-Hilferty start
    z = _normal_quantile(p)
    h = 2.0 / (9.0 * k)
    x = max(k * (1.0 - h + z * math.sqrt(h)) ** 3, 1e-8)
    lo, hi = 0.0, math.inf
    for _ in range(200):
        f = chi2_sf(x, k) - target if upper else chi2_cdf(x, k) - target
        # f increases with x for the cdf and decreases for the sf
        if (f > 0) != upper:
            hi = x
        else:
            lo = x
        dens = math.exp((0.5 * k - 1.0) * math.log(x) - 0.5 * x - 0.5 * k * math.log(2.0)
                        - math.lgamma(0.5 * k))
        step = f / dens if dens > 0 else math.inf
        x_new = x + step if upper else x - step
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * x
        if abs(x_new - x) <= 1e-15 * max(1.0, x):
            return x_new
        x = x_new
    return x


def _normal_quantile(p: float) -> float:
    # Acklam's rational approximation; only used to seed Newton
    a = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
         1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
    b = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
         6.680131188771972e01, -1.328068155288572e01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
         -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
         3.754408661907416e00)
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    if p > 1.0 - 0.02425:
        return -_normal_quantile(1.0 - p)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)


def _ncx2_parts(x: float, k: float, lam: float) -> tuple[float, float]:
    """Poisson-mixture sums ``(F, 1 - F)`` of the noncentral chi-squared law."""
    half_lam = 0.5 * lam
    if half_lam == 0.0:  # subnormal lam underflows; the law is central to working precision
        return gammainc_pq(0.5 * k, 0.5 * x)
    hx = 0.5 * x
    j0 = int(half_lam)
    a0 = 0.5 * k + j0
    log_w0 = -half_lam + j0 * math.log(half_lam) - math.lgamma(j0 + 1.0) if j0 > 0 else -half_lam
    p0, q0 = gammainc_pq(a0, hx)
    cdf = sf = 0.0

    # upward: P(a+1) = P(a) - x^a e^-x / Gamma(a+1)
    log_w, p, q, a = log_w0, p0, q0, a0
    log_t = _log_prefactor(a, hx) - math.log(a)  # x^a e^-x / Gamma(a+1)
    j = j0
    while True:
        w = math.exp(log_w)
        cdf += w * p
        sf += w * q
        j += 1
        log_w += math.log(half_lam) - math.log(j)
        t = math.exp(log_t)
        p = max(p - t, 0.0)
        q = min(q + t, 1.0)
        a += 1.0
        log_t += math.log(hx) - math.log(a)
        if log_w < -745.0 or (j - j0 > 2 and math.exp(log_w) < 1e-20):
            break

    # downward: P(a-1) = P(a) + x^(a-1) e^-x / Gamma(a)
    log_w, p, q, a = log_w0, p0, q0, a0
    j = j0
    while j > 0:
        log_w += math.log(j) - math.log(half_lam)
        j -= 1
        t = math.exp(_log_prefactor(a, hx) - math.log(hx))  # x^(a-1) e^-x / Gamma(a)
        p = min(p + t, 1.0)
        q = max(q - t, 0.0)
        a -= 1.0
        w = math.exp(log_w)
        cdf += w * p
        sf += w * q
        if w < 1e-20 and j0 - j > 2:
            break
    return cdf, sf


def noncentral_chi2_cdf(x: float, k: float, lam: float) -> float:
    _check_dof(k)
    if lam < 0:
        raise ValueError("noncentrality must be non-negative")
    if x <= 0:
        return 0.0
    if lam == 0:
        return chi2_cdf(x, k)
    return min(max(_ncx2_parts(x, k, lam)[0], 0.0), 1.0)


def noncentral_chi2_sf(x: float, k: float, lam: float) -> float:
    _check_dof(k)
    if lam < 0:
        raise ValueError("noncentrality must be non-negative")
    if x <= 0:
        return 1.0
    if lam == 0:
        return chi2_sf(x, k)
    return min(max(_ncx2_parts(x, k, lam)[1], 0.0), 1.0)


def marcum_q(m: float, a: float, b: float) -> float:
    """Generalized Marcum Q, ``Q_m(a, b) = P[chi2_{2m}(a^2) > b^2]``."""
    if m <= 0:
        raise ValueError("Marcum Q order must be positive")
    if a < 0 or b < 0:
        raise ValueError("Marcum Q arguments must be non-negative")
    return noncentral_chi2_sf(b * b, 2.0 * m, a * a)

"""Independent reference computations used as test oracles.

Everything here is scipy/closed-form based and deliberately avoids the
package's own quadrature and semigroup code paths.
"""

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import erf


def mehler_scale(delta: float, sigma: float) -> float:
    return math.sqrt(2.0 * delta * (1.0 - math.exp(-sigma)))


def mehler_apply_quad(phi, delta, sigma, theta, points=(), epsabs=1e-13):
    """Semigroup value by scipy (QUADPACK) quadrature."""
    if sigma == 0.0:
        return float(phi(theta))
    s = mehler_scale(delta, sigma)
    mu = theta * math.exp(-0.5 * sigma)
    a, b = mu - 10.0 * s, mu + 10.0 * s
    pts = [x for x in points if a < x < b]
    val, _ = quad(lambda y: math.exp(-(y - mu) ** 2 / (2 * s * s)) * phi(y)
                  / (math.sqrt(2 * math.pi) * s), a, b,
                  points=pts or None, limit=300, epsabs=epsabs)
    return val


def gauss_weight(delta, theta):
    return (4.0 * math.pi * delta) ** -0.5 * math.exp(-theta**2 / (4.0 * delta))


def weighted_norm_quad(f, delta, m, span=40.0, points=(), epsabs=1e-13):
    """Weighted L^m norm of a scalar callable by scipy quadrature."""
    val, _ = quad(lambda th: abs(f(th)) ** m * gauss_weight(delta, th),
                  -span, span, points=[x for x in points if -span < x < span] or None,
                  limit=400, epsabs=epsabs)
    return val ** (1.0 / m)


def smoothing_ratio_nested(phi_scalar, delta, sigma, k, m, lam, points=()):
    """Nested-quadrature smoothing ratio oracle (outer norm over inner
    semigroup integral, both scipy)."""
    num = weighted_norm_quad(
        lambda th: mehler_apply_quad(phi_scalar, delta, sigma, th, points=points),
        lam, m, epsabs=1e-12)
    den = weighted_norm_quad(phi_scalar, lam, k, points=points, epsabs=1e-14)
    return num / den


def _phi_cdf(z):
    return 0.5 * (1.0 + erf(z / math.sqrt(2.0)))


def piecewise_linear_apply_exact(knots, vals, delta, sigma, theta):
    """Closed-form semigroup value for a piecewise-linear function that is
    constant beyond its end knots (Gaussian-segment integrals via erf)."""
    s = mehler_scale(delta, sigma)
    mu = theta * math.exp(-0.5 * sigma)
    edges = np.concatenate([[-np.inf], np.asarray(knots, float), [np.inf]])
    total = 0.0
    for i in range(len(edges) - 1):
        a, b = edges[i], edges[i + 1]
        if i == 0:
            alpha, beta = vals[0], 0.0
        elif i == len(edges) - 2:
            alpha, beta = vals[-1], 0.0
        else:
            x0, x1 = knots[i - 1], knots[i]
            beta = (vals[i] - vals[i - 1]) / (x1 - x0)
            alpha = vals[i - 1] - beta * x0
        za = -np.inf if a == -np.inf else (a - mu) / s
        zb = np.inf if b == np.inf else (b - mu) / s
        cdf_a = 0.0 if za == -np.inf else _phi_cdf(za)
        cdf_b = 1.0 if zb == np.inf else _phi_cdf(zb)
        pdf_a = 0.0 if za == -np.inf else math.exp(-za * za / 2) / math.sqrt(2 * math.pi)
        pdf_b = 0.0 if zb == np.inf else math.exp(-zb * zb / 2) / math.sqrt(2 * math.pi)
        # E[(alpha + beta Y) 1_{a<Y<b}] for Y ~ N(mu, s^2)
        total += alpha * (cdf_b - cdf_a) + beta * (mu * (cdf_b - cdf_a) - s * (pdf_b - pdf_a))
    return total


def heat_gaussian_radial(rho, t, delta, n, t0):
    """Radial heat-kernel solution of u_t = delta*Lap(u) in n dimensions:
    (4 pi delta (t+t0))^{-n/2} exp(-rho^2 / (4 delta (t+t0)))."""
    tau = t + t0
    return (4.0 * math.pi * delta * tau) ** (-n / 2.0) * np.exp(
        -np.asarray(rho, float) ** 2 / (4.0 * delta * tau))

"""Closed-form reference values, written without the package's numerics."""

import math

import numpy as np


def normal_cdf(z):
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_mass(center, sd, lo, hi):
    """Mass of N(center, sd^2) on [lo, hi]."""
    return normal_cdf((hi - center) / sd) - normal_cdf((lo - center) / sd)


def branch_probability_plus(w_plus, g, box=8.0):
    """Share of the pointer distribution at x > 0 for branches N(+g, 1) and N(-g, 1) cut to [-box, box]."""
    w_minus = 1.0 - w_plus
    right = w_plus * normal_mass(g, 1.0, 0.0, box) + w_minus * normal_mass(-g, 1.0, 0.0, box)
    total = w_plus * normal_mass(g, 1.0, -box, box) + w_minus * normal_mass(-g, 1.0, -box, box)
    return right / total


def half_normal_mean(center, lo, hi):
    """Mean of N(center, 1) restricted to [lo, hi]."""
    a, b = lo - center, hi - center
    pdf = lambda z: math.exp(-z * z / 2) / math.sqrt(2 * math.pi)  # noqa: E731
    return center + (pdf(a) - pdf(b)) / normal_mass(0.0, 1.0, a, b)


def gaussian2d(X, P, x0=0.0, p0=0.0, var_x=1.0, var_p=1.0):
    return np.exp(-(X - x0) ** 2 / (2 * var_x) - (P - p0) ** 2 / (2 * var_p)) / (2 * np.pi * math.sqrt(var_x * var_p))


def rotate_gaussian(X, P, x0, p0, var_x, var_p, t):
    """Harmonic flow for time t: the density at (X, P) is the initial density at the back-rotated point."""
    c, s = math.cos(t), math.sin(t)
    xb = c * X - s * P
    pb = s * X + c * P
    return gaussian2d(xb, pb, x0, p0, var_x, var_p)


def product_of_gaussians(center_a, var_a, center_b, var_b):
    """Mean and variance of the normalized product of two normal densities."""
    var = var_a * var_b / (var_a + var_b)
    mean = (center_a * var_b + center_b * var_a) / (var_a + var_b)
    return mean, var


def larmor(rho0, omega, t):
    """exp(-i omega sigma_z t / 2) rho0 exp(+i omega sigma_z t / 2)."""
    u = np.diag([np.exp(-0.5j * omega * t), np.exp(0.5j * omega * t)])
    return u @ rho0 @ u.conj().T


def binomial_band(p, n, k=3.0):
    return k * math.sqrt(p * (1 - p) / n)


def midpoint_mass(center, lo, hi, h):
    """Midpoint-rule mass of N(center, 1) over cells of width h tiling [lo, hi]."""
    n = int(round((hi - lo) / h))
    return h * sum(math.exp(-((lo + (i + 0.5) * h - center) ** 2) / 2) for i in range(n)) / math.sqrt(2 * math.pi)


def midpoint_branch_probability_plus(w_plus, g, h, box=8.0):
    """``branch_probability_plus`` with every mass replaced by its cell-centred midpoint sum."""
    w_minus = 1.0 - w_plus
    right = w_plus * midpoint_mass(g, 0.0, box, h) + w_minus * midpoint_mass(-g, 0.0, box, h)
    total = w_plus * midpoint_mass(g, -box, box, h) + w_minus * midpoint_mass(-g, -box, box, h)
    return right / total


def offdiag_ratio_after_impulse(w_plus, g, box=8.0):
    """|integral rho_+-| after over before, for a standard normal pointer cut to the box.

    The off-diagonal keeps the unshifted x profile and gains exp(-g^2); the
    diagonal branches move to +-g and lose the mass pushed past the box edge,
    which the unit-trace normalization hands back to every element.
    """
    kept = w_plus * normal_mass(g, 1.0, -box, box) + (1 - w_plus) * normal_mass(-g, 1.0, -box, box)
    return math.exp(-g * g) * normal_mass(0.0, 1.0, -box, box) / kept


def conditional_after_impulse(w_plus, g, x):
    """Conditional spin state at pointer position x after the impulse, standard normal pointer.

    Returns (weight of +, weight of -, |off-diagonal|). The off-diagonal element
    is e^{-g^2} rho_C(x, p - i g) e^{-2 i g p}, whose modulus is
    e^{-g^2 / 2} N(x) N(p); the p dependence cancels in the ratio.
    """
    n = lambda z: math.exp(-z * z / 2)  # noqa: E731
    a = w_plus * n(x - g)
    b = (1 - w_plus) * n(x + g)
    off = math.sqrt(w_plus * (1 - w_plus)) * math.exp(-g * g / 2) * n(x)
    return a / (a + b), b / (a + b), off / (a + b)


def midpoint_pointer_mean(w_plus, g, sign, h, box=8.0):
    """Mean of x / g over the half-plane sign * x > 0, both branches, by cell-centred sums."""
    n = int(round(box / h))
    num = den = 0.0
    for i in range(n):
        x = sign * (i + 0.5) * h
        rho = w_plus * math.exp(-((x - g) ** 2) / 2) + (1 - w_plus) * math.exp(-((x + g) ** 2) / 2)
        num += x * rho
        den += rho
    return num / den / g

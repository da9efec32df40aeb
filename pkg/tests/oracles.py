"""Independent reference values built from closed forms and scipy special functions.

Nothing here imports shrinkerlab, so agreement with the package is a real check.
"""

from math import exp, pi, sqrt

import numpy as np
from scipy import integrate, optimize, special


def circle_gaussian_area(radius: float) -> float:
    """(4 pi)^{-1/2} times the Gaussian-weighted length of a round circle, by quadrature."""
    val, _ = integrate.quad(lambda th: radius * exp(-radius ** 2 / 4), 0, 2 * pi)
    return val / sqrt(4 * pi)


def circle_entropy() -> float:
    """Maximise the Gaussian area over the radius numerically."""
    res = optimize.minimize_scalar(lambda r: -circle_gaussian_area(r), bounds=(0.1, 10), method="bounded",
                                   options={"xatol": 1e-12})
    return -res.fun


def sphere2_gaussian_area(radius: float) -> float:
    return (4 * pi) ** -1 * 4 * pi * radius ** 2 * exp(-radius ** 2 / 4)


def line_gaussian_area() -> float:
    val, _ = integrate.quad(lambda s: exp(-s * s / 4), -np.inf, np.inf)
    return val / sqrt(4 * pi)


def circle_levels(count: int) -> np.ndarray:
    """Spectrum of the drift Laplacian on the circle of radius sqrt(2): Fourier modes l^2/2, doubled for l > 0."""
    vals = [0.0]
    l = 1
    while len(vals) < count:
        vals += [l * l / 2] * 2
        l += 1
    return np.array(vals[:count])


def hermite_levels(count: int) -> np.ndarray:
    return np.arange(count) / 2.0


def _kummer_even(mu, a):
    return special.hyp1f1(-mu, 0.5, a * a / 4)


def _kummer_odd(mu, a):
    return special.hyp1f1(0.5 - mu, 1.5, a * a / 4)


def ou_dirichlet_levels(a: float, count: int) -> np.ndarray:
    """Dirichlet eigenvalues of u'' - (s/2) u' + mu u = 0 on [-a, a].

    Even solutions are M(-mu, 1/2, s^2/4) and odd ones s M(1/2 - mu, 3/2, s^2/4);
    eigenvalues are the roots in mu of these at s = a, found by bracketing.
    """
    grid = np.linspace(0.0, 4.0 * count + 10, 40000)
    roots = []
    for f in (_kummer_even, _kummer_odd):
        vals = f(grid, a)
        for i in np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:])):
            roots.append(optimize.brentq(f, grid[i], grid[i + 1], args=(a,), xtol=1e-14))
    return np.sort(roots)[:count]


def cylinder_dirichlet_levels(r: float, count: int) -> np.ndarray:
    """S^1_{sqrt 2} x R restricted to |x| <= r: circle modes plus Dirichlet OU levels on [-sqrt(r^2-2), sqrt(r^2-2)]."""
    a = sqrt(r * r - 2)
    ou = ou_dirichlet_levels(a, count)
    circ = circle_levels(2 * count)
    return np.sort((circ[:, None] + ou[None, :]).ravel())[:count]


def cylinder_levels(k: int, n: int, mu_max: float) -> list:
    """Eigenvalues of S^k x R^{n-k} up to mu_max with multiplicity, for k in {1, 2} and n - k in {0, 1, 2}.

    Uses explicit counts: spherical harmonics of degree l have dimension 2 (k=1, l>0)
    or 2l+1 (k=2); degree-m Hermite polynomials in d variables have dimension m+1 for d=2.
    """
    d = n - k
    out = []
    for l in range(0, 200):
        sph = l * (l + k - 1) / (2 * k)
        if sph > mu_max:
            break
        ms = 1 if k == 2 and l == 0 else (2 * l + 1 if k == 2 else (1 if l == 0 else 2))
        for m in range(0, 400):
            mu = sph + m / 2
            if mu > mu_max or (d == 0 and m > 0):
                break
            herm = {0: 1, 1: 1, 2: m + 1}[d]
            out += [mu] * (ms * herm)
    return sorted(out)


def shrinking_circle_radius(r0: float, t0: float, t: float) -> float:
    return sqrt(r0 * r0 - 2 * (t - t0))

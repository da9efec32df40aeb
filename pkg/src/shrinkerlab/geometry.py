"""Sampled model shrinkers and discrete curve geometry.

Two concrete discretizations share the :class:`SampledManifold` interface:

* :class:`SampledCurve` -- an ordered polygon in R^N, open or closed.
* :class:`CylinderSamples` -- a rotated S^k_{sqrt(2k)} x [-A, A] tensor grid.

Orientation convention: ``curvature_vector`` is the discrete Laplacian of the
position, which points toward the centre of the osculating circle.  The mean
curvature vector in the ``H = -tr A`` convention is its negative, so the
shrinker equation ``H = x^perp / 2`` reads ``curvature_vector + x^perp/2 = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb, pi, sqrt

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.stats import special_ortho_group

from .errors import (
    ConvergenceError,
    PreconditionError,
    RemeshRequired,
    UnsupportedProductError,
)

SPACING_RATIO = 3.0


def gaussian_normalization(n: int) -> float:
    """Return (4 pi)^(-n/2)."""
    return (4.0 * pi) ** (-0.5 * n)


def sphere_entropy(k: int) -> float:
    """Closed-form F (= entropy) of the round shrinking sphere S^k_{sqrt(2k)}."""
    # |S^k| = 2 pi^((k+1)/2) / Gamma((k+1)/2)
    from math import gamma

    area = 2.0 * pi ** ((k + 1) / 2) / gamma((k + 1) / 2) * (2.0 * k) ** (k / 2)
    return gaussian_normalization(k) * area * np.exp(-k / 2)


class SampledManifold:
    """Common interface for weighted discrete manifolds.

    Subclasses provide ``nodes`` (M x N), ``dim`` (intrinsic n) and
    ``measure`` (per-node quadrature element).  Everything Gaussian is
    derived from those three.
    """

    nodes: np.ndarray
    dim: int

    @property
    def measure(self) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.nodes.shape[1]

    @cached_property
    def sq_norms(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.nodes, self.nodes)

    @cached_property
    def gaussian(self) -> np.ndarray:
        return np.exp(-self.sq_norms / 4.0)

    @cached_property
    def weights(self) -> np.ndarray:
        """Per-node Gaussian weight times measure element."""
        return self.measure * self.gaussian

    @property
    def normalization(self) -> float:
        return gaussian_normalization(self.dim)

    @property
    def interior_mask(self) -> np.ndarray:
        """Nodes away from any truncation boundary."""
        return np.ones(self.num_nodes, dtype=bool)

    def ball_mask(self, r: float) -> np.ndarray:
        return self.sq_norms <= r * r

    def affine_frame(self, rel_tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
        """Centroid and orthonormal basis (columns) of the affine hull."""
        centroid = self.nodes.mean(axis=0)
        _, s, vt = np.linalg.svd(self.nodes - centroid, full_matrices=False)
        rank = int(np.sum(s > rel_tol * max(s[0], 1e-300)))
        return centroid, vt[:rank].T

    def gaussian_area(self, scale, shift) -> np.ndarray:
        """F(c Sigma + x0) for arrays of scales ``c`` (P,) and shifts (P, N)."""
        scale = np.atleast_1d(np.asarray(scale, dtype=float))
        shift = np.atleast_2d(np.asarray(shift, dtype=float))
        out = np.empty(scale.shape[0])
        chunk = max(1, 2_000_000 // max(self.num_nodes, 1))
        for lo in range(0, scale.shape[0], chunk):
            c = scale[lo:lo + chunk, None, None]
            pts = c * self.nodes[None] + shift[lo:lo + chunk, None, :]
            g = np.exp(-np.einsum("pij,pij->pi", pts, pts) / 4.0)
            out[lo:lo + chunk] = (c[:, 0, 0] ** self.dim) * (g @ self.measure)
        return self.normalization * out


# ----------------------------------------------------------------------------
# curves
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampledCurve(SampledManifold):
    """Polygonal curve in R^N with trapezoidal arclength weights.

    Parameters
    ----------
    nodes : (M, N) array
        Ordered node positions.  Closed curves must not repeat the first node.
    closed : bool
        Whether the last node connects back to the first.
    check : bool
        Enforce the spacing invariant (every edge within a factor 3 of the
        mean spacing).  Flow internals switch this off between remeshes.
    tail_certified : bool
        Open curves only: the truncation is far enough out that Gaussian
        quantities are unaffected.
    """

    nodes: np.ndarray
    closed: bool = True
    check: bool = True
    tail_certified: bool = False
    dim: int = field(default=1, init=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] < 2:
            raise PreconditionError("curve nodes must be an (M, N) array with N >= 2")
        if not np.all(np.isfinite(nodes)):
            raise PreconditionError("curve nodes must be finite")
        if nodes.shape[0] < 3:
            raise PreconditionError("a curve needs at least 3 nodes")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        if self.closed and np.linalg.norm(nodes[0] - nodes[-1]) <= 1e-12 * (1 + np.abs(nodes).max()):
            raise PreconditionError("closed curves must not duplicate the first node")
        if self.edge_lengths.min() <= 0.0:
            raise RemeshRequired("coincident consecutive nodes")
        if self.check:
            ratio = self.spacing_ratio
            if ratio[0] < 1.0 / SPACING_RATIO or ratio[1] > SPACING_RATIO:
                raise RemeshRequired(
                    f"node spacing outside [h/3, 3h]: min/h={ratio[0]:.3g}, max/h={ratio[1]:.3g}"
                )

    # --- basic geometry ---------------------------------------------------

    @cached_property
    def edges(self) -> np.ndarray:
        if self.closed:
            return np.roll(self.nodes, -1, axis=0) - self.nodes
        return np.diff(self.nodes, axis=0)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edges, axis=1)

    @property
    def length(self) -> float:
        return float(self.edge_lengths.sum())

    @property
    def spacing_ratio(self) -> tuple[float, float]:
        h = self.edge_lengths.mean()
        return float(self.edge_lengths.min() / h), float(self.edge_lengths.max() / h)

    @cached_property
    def measure(self) -> np.ndarray:
        """Trapezoidal arclength weight of each node."""
        ell = self.edge_lengths
        if self.closed:
            return 0.5 * (ell + np.roll(ell, 1))
        m = np.zeros(self.num_nodes)
        m[:-1] += 0.5 * ell
        m[1:] += 0.5 * ell
        return m

    @property
    def arclength_weights(self) -> np.ndarray:
        return self.measure

    @cached_property
    def edge_gaussian(self) -> np.ndarray:
        mid = self.nodes[: self.edges.shape[0]] + 0.5 * self.edges
        return np.exp(-np.einsum("ij,ij->i", mid, mid) / 4.0)

    @property
    def interior_mask(self) -> np.ndarray:
        mask = np.ones(self.num_nodes, dtype=bool)
        if not self.closed:
            mask[[0, -1]] = False
        return mask

    @cached_property
    def tangents(self) -> np.ndarray:
        """Unit tangents from central chord differences (one-sided at open ends)."""
        unit = self.edges / self.edge_lengths[:, None]
        if self.closed:
            t = unit + np.roll(unit, 1, axis=0)
        else:
            t = np.empty_like(self.nodes)
            t[1:-1] = unit[1:] + unit[:-1]
            t[0] = unit[0]
            t[-1] = unit[-1]
        return t / np.linalg.norm(t, axis=1)[:, None]

    @cached_property
    def curvature_vector(self) -> np.ndarray:
        """Discrete Laplacian of position (zero at open ends)."""
        k = self.laplacian(self.nodes)
        if not self.closed:
            k[[0, -1]] = 0.0
        return k

    def normal_part(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec, dtype=float)
        t = self.tangents
        return vec - np.einsum("ij,ij->i", vec, t)[:, None] * t

    @cached_property
    def x_tangential(self) -> np.ndarray:
        """<x, T> at every node."""
        return np.einsum("ij,ij->i", self.nodes, self.tangents)

    # --- discrete operators (act along axis 0) -----------------------------

    def edge_diff(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.closed:
            return np.roll(u, -1, axis=0) - u
        return np.diff(u, axis=0)

    def _divergence(self, flux: np.ndarray) -> np.ndarray:
        if self.closed:
            return flux - np.roll(flux, 1, axis=0)
        div = np.zeros((self.num_nodes,) + flux.shape[1:])
        div[:-1] += flux
        div[1:] -= flux
        return div

    def _bcast(self, vec: np.ndarray, like: np.ndarray) -> np.ndarray:
        return vec.reshape(vec.shape + (1,) * (like.ndim - 1))

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        """Second differences in arclength, Neumann at open ends."""
        d = self.edge_diff(u)
        flux = d / self._bcast(self.edge_lengths, d)
        return self._divergence(flux) / self._bcast(self.measure, d)

    def drift(self, u: np.ndarray) -> np.ndarray:
        """Drift Laplacian e^f (e^{-f} u')' in flux form."""
        d = self.edge_diff(u)
        flux = d * self._bcast(self.edge_gaussian / self.edge_lengths, d)
        return self._divergence(flux) / self._bcast(self.weights, d)

    def gradient(self, u: np.ndarray) -> np.ndarray:
        """Arclength derivative at nodes (length-weighted edge average)."""
        d = self.edge_diff(u) / self._bcast(self.edge_lengths, self.edge_diff(u))
        ell = self.edge_lengths
        if self.closed:
            prev_d, prev_l = np.roll(d, 1, axis=0), np.roll(ell, 1)
            return (d * self._bcast(prev_l, d) + prev_d * self._bcast(ell, d)) / self._bcast(ell + prev_l, d)
        g = np.empty((self.num_nodes,) + d.shape[1:])
        g[1:-1] = (d[1:] * self._bcast(ell[:-1], d[1:]) + d[:-1] * self._bcast(ell[1:], d[1:])) / self._bcast(
            ell[1:] + ell[:-1], d[1:]
        )
        g[0], g[-1] = d[0], d[-1]
        return g

    def grad_sq(self, u: np.ndarray) -> np.ndarray:
        """|grad u|^2 at nodes, averaging squared edge slopes."""
        d = self.edge_diff(u)
        slope2 = (d / self.edge_lengths) ** 2
        ell = self.edge_lengths
        if self.closed:
            return (slope2 * ell + np.roll(slope2 * ell, 1)) / (ell + np.roll(ell, 1))
        out = np.empty(self.num_nodes)
        out[1:-1] = (slope2[1:] * ell[1:] + slope2[:-1] * ell[:-1]) / (ell[1:] + ell[:-1])
        out[0], out[-1] = slope2[0], slope2[-1]
        return out

    def dirichlet_form(self, u: np.ndarray, v: np.ndarray) -> float:
        """Normalized Gaussian energy (4 pi)^{-1/2} sum_e g_e du dv / l_e."""
        return self.normalization * float(
            np.sum(self.edge_gaussian * self.edge_diff(u) * self.edge_diff(v) / self.edge_lengths)
        )

    # --- transforms ---------------------------------------------------------

    def with_nodes(self, nodes: np.ndarray, check: bool | None = None) -> "SampledCurve":
        return SampledCurve(nodes, self.closed, self.check if check is None else check, self.tail_certified)

    def scaled(self, c: float) -> "SampledCurve":
        return self.with_nodes(c * self.nodes)

    def translated(self, v) -> "SampledCurve":
        return self.with_nodes(self.nodes + np.asarray(v, dtype=float))

    def rotated(self, rotation: np.ndarray) -> "SampledCurve":
        return self.with_nodes(self.nodes @ np.asarray(rotation).T)

    def embedded(self, N: int) -> "SampledCurve":
        """Pad with zero coordinates up to ambient dimension N."""
        pad = np.zeros((self.num_nodes, N - self.ambient_dim))
        return self.with_nodes(np.hstack([self.nodes, pad]))


# ----------------------------------------------------------------------------
# constructors for curves
# ----------------------------------------------------------------------------


def circle(radius: float = sqrt(2.0), resolution: int = 512, N: int = 2, center=None) -> SampledCurve:
    """Regular polygon on the circle of given radius in the x1-x2 plane."""
    theta = 2 * pi * np.arange(resolution) / resolution
    nodes = np.zeros((resolution, N))
    nodes[:, 0] = radius * np.cos(theta)
    nodes[:, 1] = radius * np.sin(theta)
    if center is not None:
        nodes += np.asarray(center, dtype=float)
    return SampledCurve(nodes, closed=True)


def line(direction=(1.0, 0.0), halfwidth: float = 12.0, resolution: int = 2001) -> SampledCurve:
    """Segment of a line through the origin, certified when halfwidth >= 8."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    s = np.linspace(-halfwidth, halfwidth, resolution)
    return SampledCurve(s[:, None] * d[None], closed=False, tail_certified=halfwidth >= 8.0)


def closed_curve_from_function(func, resolution: int = 512, oversample: int = 8) -> SampledCurve:
    """Sample ``func(theta) -> (P, N)`` densely and resample uniformly in arclength."""
    theta = 2 * pi * np.arange(resolution * oversample) / (resolution * oversample)
    dense = SampledCurve(np.asarray(func(theta), dtype=float), closed=True, check=False)
    return remesh(dense, resolution)[0]


def ellipse(a: float, b: float, resolution: int = 512, N: int = 2) -> SampledCurve:
    def f(theta):
        pts = np.zeros((theta.size, N))
        pts[:, 0] = a * np.cos(theta)
        pts[:, 1] = b * np.sin(theta)
        return pts

    return closed_curve_from_function(f, resolution)


def remesh(curve: SampledCurve, resolution: int | None = None, fields: np.ndarray | None = None):
    """Resample positions (and optional node fields) uniformly in arclength.

    Cubic splines in cumulative chord length; periodic for closed curves,
    endpoints pinned for open ones.  Returns ``(curve, fields)``.
    """
    M = resolution or curve.num_nodes
    data = curve.nodes if fields is None else np.hstack([curve.nodes, np.asarray(fields).reshape(curve.num_nodes, -1)])
    ell = curve.edge_lengths
    if curve.closed:
        s = np.concatenate([[0.0], np.cumsum(ell)])
        spline = CubicSpline(s, np.vstack([data, data[:1]]), bc_type="periodic", axis=0)
        new_s = s[-1] * np.arange(M) / M
    else:
        s = np.concatenate([[0.0], np.cumsum(ell)])
        spline = CubicSpline(s, data, axis=0)
        new_s = np.linspace(0.0, s[-1], M)
    new = spline(new_s)
    N = curve.ambient_dim
    out_curve = SampledCurve(new[:, :N], curve.closed, check=False, tail_certified=curve.tail_certified)
    out_fields = None
    if fields is not None:
        out_fields = new[:, N:].reshape((M,) + np.asarray(fields).shape[1:])
    return out_curve, out_fields


# ----------------------------------------------------------------------------
# cylinders
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class CylinderSpec:
    """S^k_{sqrt(2k)} x R^{n-k} inside R^N, rotated by ``rotation``."""

    k: int
    n: int
    N: int
    rotation: np.ndarray | None = None

    def __post_init__(self):
        if not (1 <= self.k <= self.n):
            raise PreconditionError("need 1 <= k <= n")
        if self.N < self.n + 1:
            raise PreconditionError("need N >= n + 1")
        rot = np.eye(self.N) if self.rotation is None else np.array(self.rotation, dtype=float)
        if rot.shape != (self.N, self.N) or np.abs(rot.T @ rot - np.eye(self.N)).max() > 1e-12:
            raise PreconditionError("rotation must be an orthogonal N x N matrix (tol 1e-12)")
        rot.setflags(write=False)
        object.__setattr__(self, "rotation", rot)

    @property
    def radius(self) -> float:
        return sqrt(2.0 * self.k)

    @property
    def sphere_frame(self) -> np.ndarray:
        return self.rotation[:, : self.k + 1]

    @property
    def axis_frame(self) -> np.ndarray:
        return self.rotation[:, self.k + 1 : self.n + 1]

    @property
    def coordinate_frame(self) -> np.ndarray:
        """Columns are the n+1 cylinder coordinate directions x_1..x_{n+1}."""
        return self.rotation[:, : self.n + 1]

    @property
    def entropy(self) -> float:
        return sphere_entropy(self.k)


def random_rotation(N: int, seed: int = 0) -> np.ndarray:
    return special_ortho_group.rvs(N, random_state=np.random.default_rng(seed))


def default_axis_halfwidth(k: int) -> float:
    return max(8.0, 2.0 * sqrt(2.0 * k) + 6.0)


@dataclass(frozen=True, eq=False)
class CylinderSamples(SampledManifold):
    """Tensor-grid sampling of a rotated S^k x [-A, A].

    Node index is ``i_sphere * n_axis + i_axis``.  For ``k = 1`` the factors
    are themselves :class:`SampledCurve` objects and discrete operators act
    per factor; for ``k = 2`` only quadrature is available.
    """

    spec: CylinderSpec
    sphere_points: np.ndarray  # (n_s, k+1) local coordinates
    sphere_measure: np.ndarray
    axis: SampledCurve | None  # nodes (n_a, 2) = (s, 0); None when n == k
    tail_certified: bool = True

    @property
    def dim(self) -> int:
        return self.spec.n

    @property
    def n_sphere(self) -> int:
        return self.sphere_points.shape[0]

    @property
    def n_axis(self) -> int:
        return 1 if self.axis is None else self.axis.num_nodes

    @property
    def axis_coords(self) -> np.ndarray:
        return np.zeros(1) if self.axis is None else self.axis.nodes[:, 0]

    @cached_property
    def local_coords(self) -> np.ndarray:
        """(M, n+1) coordinates in the cylinder frame."""
        sp = np.repeat(self.sphere_points, self.n_axis, axis=0)
        if self.axis is None:
            return sp
        ax = np.tile(self.axis_coords, self.n_sphere)[:, None]
        return np.hstack([sp, ax])

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = self.local_coords @ self.spec.coordinate_frame.T
        nodes.setflags(write=False)
        return nodes

    @cached_property
    def measure(self) -> np.ndarray:
        ax = np.ones(1) if self.axis is None else self.axis.measure
        return np.outer(self.sphere_measure, ax).ravel()

    @property
    def interior_mask(self) -> np.ndarray:
        if self.axis is None:
            return np.ones(self.num_nodes, dtype=bool)
        return np.tile(self.axis.interior_mask, self.n_sphere)

    # --- factor structure ---------------------------------------------------

    @cached_property
    def circle_factor(self) -> SampledCurve:
        if self.spec.k != 1:
            raise UnsupportedProductError("discrete operators on the sphere factor require k = 1")
        return SampledCurve(self.sphere_points, closed=True)

    def _grid(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=float).reshape(self.n_sphere, self.n_axis)

    def _per_factor(self, op_name: str, u: np.ndarray) -> np.ndarray:
        U = self._grid(u)
        out = getattr(self.circle_factor, op_name)(U)
        if self.axis is not None:
            out = out + getattr(self.axis, op_name)(U.T).T
        return out.ravel()

    def laplacian(self, u):
        return self._per_factor("laplacian", u)

    def drift(self, u):
        # the sphere factor carries a constant Gaussian weight, so drift = laplacian there
        return self._per_factor("drift", u)

    def grad_sq(self, u):
        U = self._grid(u)
        out = np.stack([self.circle_factor.grad_sq(U[:, j]) for j in range(self.n_axis)], axis=1)
        if self.axis is not None:
            out = out + np.stack([self.axis.grad_sq(U[i]) for i in range(self.n_sphere)], axis=0)
        return out.ravel()

    def dirichlet_form(self, u, v) -> float:
        U, V = self._grid(u), self._grid(v)
        c, a = self.circle_factor, self.axis
        dc = c.edge_diff(U) * c.edge_diff(V) * (c.edge_gaussian / c.edge_lengths)[:, None]
        total = c.normalization * float(np.sum(dc.sum(axis=0) * (a.weights * a.normalization if a is not None else 1.0)))
        if a is not None:
            da = a.edge_diff(U.T) * a.edge_diff(V.T) * (a.edge_gaussian / a.edge_lengths)[:, None]
            total += a.normalization * float(np.sum(da.sum(axis=0) * c.weights * c.normalization))
        return total

    # --- Gaussian area by factorization ---------------------------------------

    def gaussian_area(self, scale, shift) -> np.ndarray:
        scale = np.atleast_1d(np.asarray(scale, dtype=float))
        shift = np.atleast_2d(np.asarray(shift, dtype=float))
        spec = self.spec
        a = shift @ spec.sphere_frame
        rest = shift - a @ spec.sphere_frame.T
        sp = np.exp(-np.sum((scale[:, None, None] * self.sphere_points[None] + a[:, None, :]) ** 2, axis=2) / 4.0)
        total = (scale ** spec.k) * (sp @ self.sphere_measure) * gaussian_normalization(spec.k)
        if self.axis is not None:
            b = shift @ spec.axis_frame
            rest = rest - b @ spec.axis_frame.T
            s = self.axis_coords
            ax = np.exp(-((scale[:, None] * s[None] + b[:, 0:1]) ** 2) / 4.0)
            total = total * scale * (ax @ self.axis.measure) * gaussian_normalization(1)
        return total * np.exp(-np.sum(rest ** 2, axis=1) / 4.0)


def _sphere_samples(k: int, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    r = sqrt(2.0 * k)
    if k == 1:
        theta = 2 * pi * np.arange(resolution) / resolution
        pts = r * np.column_stack([np.cos(theta), np.sin(theta)])
        return pts, np.full(resolution, 2 * pi * r / resolution)
    if k == 2:
        z, wz = np.polynomial.legendre.leggauss(resolution)
        nphi = 2 * resolution
        phi = 2 * pi * np.arange(nphi) / nphi
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        rho = np.sqrt(1 - zz ** 2)
        pts = r * np.column_stack([(rho * np.cos(pp)).ravel(), (rho * np.sin(pp)).ravel(), zz.ravel()])
        w = np.outer(wz, np.full(nphi, 2 * pi / nphi)).ravel() * r * r
        return pts, w
    raise UnsupportedProductError(f"sampling S^{k} is not supported (k must be 1 or 2)")


def make_cylinder_samples(spec: CylinderSpec, resolution=(64, 401), axis_halfwidth: float | None = None):
    """Discretize the rotated cylinder S^k_{sqrt(2k)} x R^{n-k}.

    ``resolution`` gives node counts per factor (an int applies to both).
    For ``k = n = 1`` a closed :class:`SampledCurve` is returned.
    """
    if spec.n - spec.k not in (0, 1):
        raise UnsupportedProductError(
            f"product rank not supported: (k, n-k) = ({spec.k}, {spec.n - spec.k}); need n-k in {{0, 1}}"
        )
    res = (resolution, resolution) if np.isscalar(resolution) else tuple(resolution)
    if min(res) < 16:
        raise PreconditionError("resolution must be at least 16 nodes per factor")
    halfwidth = default_axis_halfwidth(spec.k) if axis_halfwidth is None else float(axis_halfwidth)
    if halfwidth < 2 * spec.radius:
        raise PreconditionError("axis_halfwidth must be at least 2 sqrt(2k)")
    pts, w = _sphere_samples(spec.k, res[0])
    if spec.k == spec.n == 1:
        nodes = pts @ spec.coordinate_frame.T
        return SampledCurve(nodes, closed=True)
    axis = None
    if spec.n > spec.k:
        s = np.linspace(-halfwidth, halfwidth, res[1])
        axis = SampledCurve(np.column_stack([s, np.zeros_like(s)]), closed=False, tail_certified=True)
    return CylinderSamples(spec, pts, w, axis, tail_certified=halfwidth >= 8.0)


# ----------------------------------------------------------------------------
# shrinker residual and normal perturbations
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ShrinkerResidualReport:
    max_residual: float
    residuals: np.ndarray


def shrinker_residual(curve: SampledCurve) -> ShrinkerResidualReport:
    """Per-node |H - x^perp/2| with H = -(curvature vector)."""
    if curve.num_nodes < 32:
        raise PreconditionError("shrinker_residual needs at least 32 nodes")
    lo, hi = curve.spacing_ratio
    if lo < 1.0 / SPACING_RATIO or hi > SPACING_RATIO:
        raise RemeshRequired("degenerate spacing; remesh before computing curvature")
    res = np.linalg.norm(curve.curvature_vector + 0.5 * curve.normal_part(curve.nodes), axis=1)
    res = res[curve.interior_mask]
    return ShrinkerResidualReport(float(res.max()), res)


def _in_plane_normal(curve: SampledCurve) -> np.ndarray:
    centroid, basis = curve.affine_frame()
    if basis.shape[1] > 2:
        raise PreconditionError("scalar normal fields need a planar curve; pass vectors instead")
    t2 = curve.tangents @ basis
    n2 = np.column_stack([-t2[:, 1], t2[:, 0]])
    return n2 @ basis.T


def _is_simple_planar(curve: SampledCurve) -> bool | None:
    from shapely.geometry import LinearRing, LineString

    centroid, basis = curve.affine_frame()
    if basis.shape[1] > 2:
        return None
    xy = (curve.nodes - centroid) @ basis
    if xy.shape[1] < 2:
        return True
    geom = LinearRing(xy) if curve.closed else LineString(xy)
    return bool(geom.is_simple)


@dataclass(frozen=True)
class Perturbation:
    curve: SampledCurve
    c1_distance: float


def perturb_normal(curve: SampledCurve, field, amplitude: float) -> Perturbation:
    """Displace nodes by ``amplitude * U`` with U projected to the normal space.

    ``field`` is either a scalar node array (multiplying the in-plane unit
    normal of a planar curve) or an (M, N) vector field.  The C^1 norm is
    max|U| + max|dU/ds|.
    """
    field = np.asarray(field, dtype=float)
    if field.ndim == 1:
        U = field[:, None] * _in_plane_normal(curve)
    else:
        U = curve.normal_part(field)
    c1 = float(np.linalg.norm(U, axis=1).max() + np.linalg.norm(curve.gradient(U), axis=1).max())
    if amplitude * c1 > 0.2:
        raise PreconditionError(f"amplitude * |U|_C1 = {amplitude * c1:.3g} exceeds the graph bound 0.2")
    if amplitude == 0:
        return Perturbation(curve, 0.0)
    new = curve.with_nodes(curve.nodes + amplitude * U, check=False)
    before, after = _is_simple_planar(curve), _is_simple_planar(new)
    if before and after is False:
        raise PreconditionError("perturbation created a self-intersection")
    new = new.with_nodes(new.nodes, check=curve.check)
    return Perturbation(new, amplitude * c1)


# ----------------------------------------------------------------------------
# Abresch-Langer curves
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ALShootingResult:
    curve: SampledCurve
    m: int
    l: int
    conserved_c: float
    r0: float
    half_period_length: float
    curvature: np.ndarray
    rotation_index: int
    curvature_maxima: int
    closure_gap: float


def _al_rhs(_s, y):
    x, t = y[:2], y[2:]
    nrm = np.array([-t[1], t[0]])
    k = -0.5 * (x @ nrm)
    return np.concatenate([t, k * nrm])


def _radial_turn(_s, y):
    return y[0] * y[2] + y[1] * y[3]


_radial_turn.terminal = True
_radial_turn.direction = 1


def al_half_period(r0: float, rtol: float = 1e-12) -> tuple[float, float]:
    """Arclength and polar angle from the max of |x| at (r0, 0) to the next min."""
    sol = solve_ivp(
        _al_rhs, (0.0, 200.0), [r0, 0.0, 0.0, 1.0], events=_radial_turn,
        rtol=rtol, atol=rtol * 0.1, method="DOP853",
    )
    s_ev = sol.t_events[0]
    keep = s_ev > 1e-9
    if not np.any(keep):
        raise ConvergenceError(f"no radial turning point found from r0={r0}")
    y = sol.y_events[0][keep][0]
    return float(s_ev[keep][0]), float(np.arctan2(y[1], y[0]))


def shoot_curve(r0: float, length: float, resolution: int, rtol: float = 1e-12) -> np.ndarray:
    """Integrate the planar shrinker ODE from (r0, 0) with vertical tangent."""
    s = length * np.arange(resolution) / resolution
    sol = solve_ivp(
        _al_rhs, (0.0, length), [r0, 0.0, 0.0, 1.0], t_eval=np.append(s, length),
        rtol=rtol, atol=rtol * 0.1, method="DOP853",
    )
    return sol.y.T


def shoot_abresch_langer(m: int, l: int, tol: float = 1e-8, resolution: int = 2048,
                         max_iter: int = 200) -> ALShootingResult:
    """Closed immersed planar shrinker gamma_{m,l} by shooting and bisection.

    Starts at (r0, 0) with vertical tangent (a maximum of |x|) and bisects on
    r0 until half a curvature period sweeps polar angle pi m / l.
    """
    from math import gcd

    if not (0 < tol <= 1e-4):
        raise PreconditionError("tol must lie in (0, 1e-4]")
    if m <= 0 or l <= 0 or gcd(m, l) != 1:
        raise PreconditionError("(m, l) must be positive and gcd-reduced")
    if not (0.5 < m / l < sqrt(2) / 2):
        raise PreconditionError(f"m/l = {m}/{l} outside (1/2, sqrt(2)/2)")
    target = pi * m / l
    lo, hi = sqrt(2.0) * (1 + 1e-6), 10.0
    f_lo = al_half_period(lo)[1] - target
    f_hi = al_half_period(hi)[1] - target
    if f_lo * f_hi > 0:
        raise ConvergenceError(f"no AL curve for (m, l) = ({m}, {l}) in r0 bracket [{lo:.6g}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = al_half_period(mid)[1] - target
        if f_mid * f_lo > 0:
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo < 1e-3 * tol:
            break
    else:
        raise ConvergenceError(f"bisection did not converge; last bracket [{lo!r}, {hi!r}]")
    r0 = 0.5 * (lo + hi)
    s_half, _ = al_half_period(r0)
    total = 2 * l * s_half
    states = shoot_curve(r0, total, resolution)
    closure = float(np.linalg.norm(states[-1] - states[0]))
    if closure > 10 * tol:
        raise ConvergenceError(f"closure gap {closure:.3g} exceeds tolerance; last bracket [{lo!r}, {hi!r}]")
    xy = states[:-1, :2]
    tang = states[:-1, 2:]
    # k = -1/2 <x, J T> with J T = (-T2, T1)
    k = -0.5 * (-xy[:, 0] * tang[:, 1] + xy[:, 1] * tang[:, 0])
    conserved = k * np.exp(-np.sum(xy ** 2, axis=1) / 4.0)
    angle = np.unwrap(np.arctan2(states[:, 3], states[:, 2]))
    rot_index = int(round((angle[-1] - angle[0]) / (2 * pi)))
    maxima = int(np.sum((k > np.roll(k, 1)) & (k >= np.roll(k, -1))))
    curve = SampledCurve(xy, closed=True)
    return ALShootingResult(curve, m, l, float(conserved.mean()), r0, s_half, k, rot_index, maxima, closure)

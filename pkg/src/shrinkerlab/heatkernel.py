"""Truncated drift heat kernel and self-similar caloric functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .geometry import SampledCurve, SampledManifold, shrinker_residual
from .spectral import SpectralDecomposition


@dataclass
class TruncatedKernel:
    """H_K(x, y, t) = sum_{i<K} e^{-mu_i t} u_i(x) u_i(y) on the nodes of a sampled shrinker."""

    eigenvalues: np.ndarray
    modes: np.ndarray  # (num_nodes, K)
    manifold: SampledManifold

    @classmethod
    def from_decomposition(cls, decomp: SpectralDecomposition, mu_max: float = 6.0, count: int | None = None):
        keep = decomp.eigenvalues <= mu_max + 1e-9
        if count is not None:
            keep = np.arange(len(decomp)) < count
        return cls(decomp.eigenvalues[keep], decomp.eigenfunctions[:, keep], decomp.manifold)

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    def _quad(self, weight_scale: float = 1.0) -> np.ndarray:
        return weight_scale * self.manifold.normalization * self.manifold.weights

    def evaluate(self, x_idx, y_idx, t: float) -> np.ndarray:
        """Kernel matrix between node index sets."""
        if t <= 0:
            raise PreconditionError("kernel time must be positive")
        decay = np.exp(-self.eigenvalues * t)
        return (self.modes[x_idx] * decay) @ self.modes[y_idx].T

    def apply(self, g, t: float) -> np.ndarray:
        """x -> int H(x, y, t) g(y) e^{-f(y)} dy."""
        coeff = self.modes.T @ (self._quad() * np.asarray(g, dtype=float))
        return self.modes @ (np.exp(-self.eigenvalues * t) * coeff)

    def project(self, g) -> np.ndarray:
        coeff = self.modes.T @ (self._quad() * np.asarray(g, dtype=float))
        return self.modes @ coeff


def _sample_nodes(manifold: SampledManifold, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = manifold.num_nodes
    return np.sort(rng.choice(n, size=min(count, n), replace=False))


@dataclass
class SemigroupReport:
    max_abs: float
    max_rel: float


def semigroup_defect(kernel: TruncatedKernel, t: float, s: float, samples: int = 64, seed: int = 0,
                     weight_scale: float = 1.0) -> SemigroupReport:
    """max |H(x,y,t+s) - int H(x,z,t) H(z,y,s) e^{-f(z)} dz| over sampled node pairs.

    ``weight_scale`` perturbs the quadrature weights, as a sensitivity control.
    """
    if t <= 0 or s <= 0:
        raise PreconditionError("t and s must be positive")
    idx = _sample_nodes(kernel.manifold, samples, seed)
    direct = kernel.evaluate(idx, idx, t + s)
    left = kernel.modes[idx] * np.exp(-kernel.eigenvalues * t)
    right = kernel.modes[idx] * np.exp(-kernel.eigenvalues * s)
    gram = kernel.modes.T @ (kernel._quad(weight_scale)[:, None] * kernel.modes)
    composed = left @ gram @ right.T
    err = np.abs(direct - composed)
    return SemigroupReport(float(err.max()), float(err.max() / np.abs(direct).max()))


@dataclass
class ReproducingReport:
    defect: float
    closed_form: float
    bound: float


def reproducing_defect(kernel: TruncatedKernel, g, t: float) -> ReproducingReport:
    """Weighted L2 distance between H_t g and the spectral projection of g.

    ``closed_form`` is sqrt(sum (1 - e^{-mu_i t})^2 c_i^2) with c_i = <g, u_i>;
    ``bound`` is t mu_max |g|.
    """
    if not 0 < t <= 0.1:
        raise PreconditionError("t_small must lie in (0, 0.1]")
    g = np.asarray(g, dtype=float)
    w = kernel._quad()
    diff = kernel.apply(g, t) - kernel.project(g)
    defect = float(np.sqrt(np.sum(w * diff ** 2)))
    coeff = kernel.modes.T @ (w * g)
    closed = float(np.sqrt(np.sum(((1 - np.exp(-kernel.eigenvalues * t)) * coeff) ** 2)))
    bound = t * float(kernel.eigenvalues.max()) * float(np.sqrt(np.sum(w * g ** 2)))
    return ReproducingReport(defect, closed, bound)


def parseval_defect(kernel: TruncatedKernel, g) -> float:
    """|g|^2 - sum <g, u_i>^2, relative to |g|^2."""
    g = np.asarray(g, dtype=float)
    w = kernel._quad()
    total = float(np.sum(w * g ** 2))
    coeff = kernel.modes.T @ (w * g)
    return (total - float(coeff @ coeff)) / total


# ----------------------------------------------------------------------------
# separation of variables
# ----------------------------------------------------------------------------


@dataclass
class SelfSimilarCaloric:
    """v(y, t) = (-t)^mu u(y / sqrt(-t)) on the self-similar flow sqrt(-t) Sigma."""

    base: SampledManifold
    u: np.ndarray
    mu: float

    def nodes(self, t: float) -> np.ndarray:
        return np.sqrt(-t) * self.base.nodes

    def values(self, t: float) -> np.ndarray:
        if t >= 0:
            raise PreconditionError("self-similar caloric functions live at t < 0")
        return (-t) ** self.mu * self.u

    def __call__(self, y, t: float) -> np.ndarray:
        """Evaluate at points of the time-t slice by nearest base node."""
        y = np.atleast_2d(np.asarray(y, dtype=float)) / np.sqrt(-t)
        d2 = np.sum((y[:, None, :] - self.base.nodes[None]) ** 2, axis=2)
        return (-t) ** self.mu * self.u[np.argmin(d2, axis=1)]

    def scaling_defect(self, y, t: float, c: float) -> float:
        """|v(c y, c^2 t) - c^{2 mu} v(y, t)|."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return float(np.max(np.abs(self(c * y, c * c * t) - c ** (2 * self.mu) * self(y, t))))


@dataclass
class CaloricResidual:
    times: np.ndarray
    max_residual: float  # max |(d_t - Delta) v| dt over the window
    dt: float


def separation_of_variables(base: SampledCurve, u, mu: float, window=(-2.0, -0.5), steps: int = 16,
                            dt: float = 1e-5, shrinker_tol: float = 1e-2):
    """Build v = (-t)^mu u(y/sqrt(-t)) and measure its heat-equation residual.

    Markers on sqrt(-t) Sigma move with velocity -x/(2 sqrt(-t)); the residual
    is computed along normal-moving markers by adding the tangential
    correction <grad v, x^T> / (2 sqrt(-t)).
    """
    if not isinstance(base, SampledCurve):
        raise PreconditionError("separation_of_variables is implemented for curves")
    if shrinker_residual(base).max_residual > shrinker_tol:
        raise PreconditionError("base manifold is not a shrinker to the requested tolerance")
    u = np.asarray(u, dtype=float)
    caloric = SelfSimilarCaloric(base, u, mu)
    times = np.linspace(window[0], window[1], steps)
    worst = 0.0
    mask = base.interior_mask
    for t in times:
        slice_t = base.with_nodes(caloric.nodes(t), check=False)
        v_now, v_next = caloric.values(t), caloric.values(t + dt)
        dvdt = (v_next - v_now) / dt
        correction = slice_t.gradient(v_now) * slice_t.x_tangential / (2.0 * (-t))
        res = dvdt + correction - slice_t.laplacian(v_now)
        worst = max(worst, float(np.abs(res[mask]).max()) * dt)
    return caloric, CaloricResidual(times, worst, dt)

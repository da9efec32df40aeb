"""Spectral theory of the drift Laplacian L = Delta - (1/2) grad_{x^T}.

The operator is discretized as the symmetric pencil (K, M) where K is the
Gaussian-weighted Dirichlet form and M the lumped Gaussian mass, both with
the (4 pi)^{-n/2} normalization so that u^T M u equals ``weighted_inner``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, sqrt

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .errors import ConvergenceError, PreconditionError, UnsupportedProductError
from .gaussian import gram_matrix, weighted_norm_sq
from .geometry import CylinderSamples, SampledCurve, SampledManifold

DENSE_LIMIT = 2000
CLUSTER_RTOL = 1e-3


def cluster_tol(mu: float) -> float:
    return CLUSTER_RTOL * (1.0 + abs(mu))


# ----------------------------------------------------------------------------
# assembly and solve
# ----------------------------------------------------------------------------


def curve_stiffness(curve: SampledCurve, lengths=None, edge_gaussian=None) -> sp.csr_matrix:
    """K = c_n D^T diag(g_e / l_e) D for the edge difference matrix D.

    ``lengths`` and ``edge_gaussian`` override the per-edge values, which is
    how Dirichlet problems cut boundary edges at the sphere |x| = r.
    """
    M, E = curve.num_nodes, curve.edges.shape[0]
    rows = np.repeat(np.arange(E), 2)
    cols = np.column_stack([np.arange(E), (np.arange(E) + 1) % M]).ravel()
    vals = np.tile([-1.0, 1.0], E)
    D = sp.csr_matrix((vals, (rows, cols)), shape=(E, M))
    lengths = curve.edge_lengths if lengths is None else lengths
    g = curve.edge_gaussian if edge_gaussian is None else edge_gaussian
    w = curve.normalization * g / lengths
    return (D.T @ sp.diags(w) @ D).tocsr()


def _cut_at_sphere(curve: SampledCurve, mask: np.ndarray, r: float):
    """Edge lengths, edge Gaussians and node masses with edges leaving B_r cut at |x| = r."""
    M = curve.num_nodes
    lengths = curve.edge_lengths.copy()
    g = curve.edge_gaussian.copy()
    measure = curve.measure.copy()
    for e in range(lengths.size):
        i, j = e, (e + 1) % M
        if mask[i] == mask[j]:
            continue
        a, b = (i, j) if mask[i] else (j, i)
        xa, d = curve.nodes[a], curve.nodes[b] - curve.nodes[a]
        # |xa + s d| = r for s in (0, 1]
        qa, qb, qc = d @ d, 2 * xa @ d, xa @ xa - r * r
        s = (-qb + np.sqrt(qb * qb - 4 * qa * qc)) / (2 * qa)
        cut = s * lengths[e]
        measure[a] -= 0.5 * (lengths[e] - cut)
        lengths[e] = cut
        mid = xa + 0.5 * s * d
        g[e] = np.exp(-(mid @ mid) / 4)
    return lengths, g, measure


@dataclass
class DriftEigenproblem:
    """Symmetric generalized eigenproblem K u = mu M u on selected dofs.

    ``bc`` is ``"whole"`` (Neumann at any truncation), ``"periodic"`` or
    ``"dirichlet"`` (rows of nodes outside ``dofs`` eliminated).
    """

    manifold: SampledManifold
    stiffness: sp.csr_matrix
    mass: np.ndarray
    dofs: np.ndarray
    bc: str
    factors: tuple | None = None


def assemble(manifold: SampledManifold, bc: str = "whole", dofs=None) -> DriftEigenproblem:
    if isinstance(manifold, SampledCurve):
        K = curve_stiffness(manifold)
        mass = manifold.normalization * manifold.weights
        if dofs is None:
            dofs = np.arange(manifold.num_nodes)
        dofs = np.asarray(dofs)
        if bc == "dirichlet" and dofs.size < 4:
            raise PreconditionError("arc too short (< 4 interior nodes)")
        K = K[dofs][:, dofs].tocsr()
        return DriftEigenproblem(manifold, K, mass[dofs], dofs, bc)
    if isinstance(manifold, CylinderSamples):
        if dofs is not None:
            raise UnsupportedProductError("dof selection on products is not supported")
        circ = assemble(manifold.circle_factor)
        factors = [circ]
        K, mass = circ.stiffness, circ.mass
        if manifold.axis is not None:
            ax = assemble(manifold.axis)
            factors.append(ax)
            Mc, Ma = sp.diags(circ.mass), sp.diags(ax.mass)
            K = (sp.kron(circ.stiffness, Ma) + sp.kron(Mc, ax.stiffness)).tocsr()
            mass = np.kron(circ.mass, ax.mass)
        return DriftEigenproblem(manifold, K, mass, np.arange(manifold.num_nodes), bc, tuple(factors))
    raise PreconditionError(f"cannot assemble an eigenproblem on {type(manifold).__name__}")


@dataclass
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray  # (num_nodes, K), zero outside the dofs
    residuals: np.ndarray
    manifold: SampledManifold

    def __len__(self) -> int:
        return self.eigenvalues.size

    def mode(self, i: int) -> np.ndarray:
        return self.eigenfunctions[:, i]

    def multiplicity_clusters(self) -> np.ndarray:
        """Cluster label per eigenvalue using the tolerance 1e-3 (1 + mu)."""
        labels = np.zeros(len(self), dtype=int)
        for i in range(1, len(self)):
            same = self.eigenvalues[i] - self.eigenvalues[i - 1] <= cluster_tol(self.eigenvalues[i])
            labels[i] = labels[i - 1] + (0 if same else 1)
        return labels

    def to_csv_rows(self):
        for i, (mu, res, c) in enumerate(zip(self.eigenvalues, self.residuals, self.multiplicity_clusters())):
            yield {"index": i, "eigenvalue": float(mu), "residual": float(res), "multiplicity_cluster": int(c)}


def _solve_pencil(K: sp.spmatrix, mass: np.ndarray, count: int) -> tuple[np.ndarray, np.ndarray]:
    scale = 1.0 / np.sqrt(mass)
    A = sp.diags(scale) @ K @ sp.diags(scale)
    n = A.shape[0]
    if n <= DENSE_LIMIT:
        vals, vecs = sla.eigh(A.toarray(), subset_by_index=[0, count - 1])
    else:
        try:
            vals, vecs = eigsh(A.tocsc(), k=count, sigma=-0.1, which="LM", tol=1e-12, maxiter=20 * n)
        except Exception as exc:  # ArpackNoConvergence and friends
            raise ConvergenceError(f"shift-invert eigensolve failed: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    return vals, vecs * scale[:, None]


def operator_residual(manifold: SampledManifold, u, mu: float, mask=None) -> float:
    """Weighted L2 norm of L u + mu u relative to that of u, over ``mask``.

    An identically vanishing u (such as |x|^2 - 2 on the round circle) gets
    the absolute norm instead.
    """
    u = np.asarray(u, dtype=float)
    mask = manifold.interior_mask if mask is None else mask
    r = manifold.drift(u) + mu * u
    w = manifold.weights[mask]
    denom = np.sum(w * u[mask] ** 2)
    if denom <= 1e-20 * np.sum(w):
        denom = np.sum(w)
    return float(np.sqrt(np.sum(w * r[mask] ** 2) / denom))


def _pencil_residual(K, mass, vecs, vals) -> np.ndarray:
    R = K @ vecs - vecs * vals * mass[:, None]
    num = np.sqrt(np.sum(R ** 2 / mass[:, None], axis=0))
    den = np.sqrt(np.sum(vecs ** 2 * mass[:, None], axis=0))
    return num / den


def solve(problem: DriftEigenproblem, count: int) -> SpectralDecomposition:
    """Lowest ``count`` eigenpairs, Gaussian-orthonormal, with residuals."""
    n = problem.dofs.size
    if count > max(n // 4, 1):
        raise PreconditionError(f"count {count} exceeds node count / 4 = {n // 4}")
    manifold = problem.manifold
    if problem.factors is not None:
        return _solve_product(problem, count)
    vals, vecs = _solve_pencil(problem.stiffness, problem.mass, count)
    full = np.zeros((manifold.num_nodes, count))
    full[problem.dofs] = vecs
    res = _pencil_residual(problem.stiffness, problem.mass, vecs, vals)
    return SpectralDecomposition(vals, full, res, manifold)


def _solve_product(problem: DriftEigenproblem, count: int) -> SpectralDecomposition:
    circ = solve(problem.factors[0], min(count, problem.factors[0].dofs.size // 4))
    if len(problem.factors) == 1:
        return SpectralDecomposition(circ.eigenvalues, circ.eigenfunctions, circ.residuals, problem.manifold)
    ax = solve(problem.factors[1], min(count, problem.factors[1].dofs.size // 4))
    sums = circ.eigenvalues[:, None] + ax.eigenvalues[None, :]
    order = np.argsort(sums.ravel(), kind="stable")[:count]
    ii, jj = np.unravel_index(order, sums.shape)
    vals = sums.ravel()[order]
    vecs = np.column_stack([np.kron(circ.eigenfunctions[:, i], ax.eigenfunctions[:, j]) for i, j in zip(ii, jj)])
    # factor meshes use chord lengths; renormalize against the product quadrature
    m = problem.manifold
    vecs /= np.sqrt(m.normalization * (m.weights @ vecs ** 2))[None, :]
    res = _pencil_residual(problem.stiffness, problem.mass, vecs, vals)
    return SpectralDecomposition(vals, vecs, res, problem.manifold)


def solve_manifold(manifold: SampledManifold, count: int) -> SpectralDecomposition:
    return solve(assemble(manifold), count)


# ----------------------------------------------------------------------------
# closed-form cylinder spectra
# ----------------------------------------------------------------------------


def sphere_harmonic_count(l: int, k: int) -> int:
    """Dimension of degree-l spherical harmonics on S^k."""
    return comb(l + k, k) - (comb(l + k - 2, k) if l >= 2 else 0)


@dataclass
class CylinderClosedFormSpectrum:
    k: int
    n: int
    levels: list  # [(Fraction mu, multiplicity)], sorted

    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([np.full(m, float(mu)) for mu, m in self.levels])

    def multiplicity(self, mu) -> int:
        mu = Fraction(mu)
        return sum(m for v, m in self.levels if v == mu)


def cylinder_spectrum_closed_form(k: int, n: int, mu_max) -> CylinderClosedFormSpectrum:
    """All levels l(l+k-1)/(2k) + m/2 <= mu_max of S^k_{sqrt(2k)} x R^{n-k}."""
    if not 1 <= k <= n:
        raise PreconditionError("need 1 <= k <= n")
    mu_max = Fraction(mu_max)
    if mu_max > 50:
        raise PreconditionError("mu_max must be at most 50")
    d = n - k
    levels: dict[Fraction, int] = {}
    l = 0
    while Fraction(l * (l + k - 1), 2 * k) <= mu_max:
        sph = Fraction(l * (l + k - 1), 2 * k)
        m = 0
        while sph + Fraction(m, 2) <= mu_max:
            herm = comb(m + d - 1, d - 1) if d > 0 else (1 if m == 0 else 0)
            if herm:
                mu = sph + Fraction(m, 2)
                levels[mu] = levels.get(mu, 0) + sphere_harmonic_count(l, k) * herm
            if d == 0:
                break
            m += 1
        l += 1
    return CylinderClosedFormSpectrum(k, n, sorted(levels.items()))


# ----------------------------------------------------------------------------
# Dirichlet spectra on balls
# ----------------------------------------------------------------------------


def ou_dirichlet_interval(a: float, count: int, nbasis: int = 120) -> np.ndarray:
    """Rayleigh-Ritz upper bounds for the Dirichlet OU problem on [-a, a].

    Uses psi = e^{-s^2/8} u, turning u'' - s u'/2 = -mu u into
    -psi'' + (s^2/16 - 1/4) psi = mu psi, discretized in the Legendre
    basis L_j - L_{j+2} which vanishes at the endpoints.
    """
    leg = np.polynomial.legendre
    x, w = leg.leggauss(nbasis + 60)
    phi = np.empty((nbasis, x.size))
    dphi = np.empty_like(phi)
    for j in range(nbasis):
        c = np.zeros(j + 3)
        c[j], c[j + 2] = 1.0, -1.0
        phi[j] = leg.legval(x, c)
        dphi[j] = leg.legval(x, leg.legder(c))
    s = a * x
    V = s ** 2 / 16 - 0.25
    stiff = (dphi * w) @ dphi.T / a + a * (phi * (w * V)) @ phi.T
    mass = a * (phi * w) @ phi.T
    return sla.eigh(stiff, mass, eigvals_only=True, subset_by_index=[0, count - 1])


def sphere_levels(k: int, count: int) -> np.ndarray:
    vals = []
    l = 0
    while len(vals) < count:
        vals.extend([l * (l + k - 1) / (2 * k)] * sphere_harmonic_count(l, k))
        l += 1
    return np.array(vals[:count])


def _curve_arcs(curve: SampledCurve, mask: np.ndarray) -> list[np.ndarray]:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    if curve.closed and mask.all():
        return [idx]
    breaks = np.flatnonzero(np.diff(idx) > 1)
    runs = np.split(idx, breaks + 1)
    if curve.closed and mask[0] and mask[-1] and len(runs) > 1:
        runs[0] = np.concatenate([runs[-1], runs[0]])
        runs.pop()
    return runs


def dirichlet_spectrum(manifold: SampledManifold, r: float, count: int) -> np.ndarray:
    """Lowest ``count`` Dirichlet eigenvalues of L on B_r intersected with the manifold."""
    if r <= sqrt(2 * manifold.dim):
        raise PreconditionError("need r > sqrt(2n)")
    if isinstance(manifold, CylinderSamples):
        k = manifold.spec.k
        sph = sphere_levels(k, count)
        if manifold.axis is None:
            return sph
        a2 = r * r - 2 * k
        if a2 <= 0:
            raise PreconditionError("empty intersection with the ball")
        ax = ou_dirichlet_interval(sqrt(a2), count)
        return np.sort((sph[:, None] + ax[None, :]).ravel())[:count]
    if not isinstance(manifold, SampledCurve):
        raise PreconditionError(f"Dirichlet spectra unsupported on {type(manifold).__name__}")
    # nodes lying (almost) on the sphere are boundary nodes, not unknowns
    margin = 1e-3 * manifold.edge_lengths.min()
    mask = np.sqrt(manifold.sq_norms) < r - margin
    if manifold.closed and mask.all():
        return solve(assemble(manifold, "periodic"), count).eigenvalues
    arcs = [a for a in _curve_arcs(manifold, mask) if a.size >= 4]
    if not arcs:
        raise PreconditionError("empty intersection with the ball")
    lengths, g, measure = _cut_at_sphere(manifold, mask, r)
    K_cut = curve_stiffness(manifold, lengths, g)
    mass = manifold.normalization * measure * manifold.gaussian
    vals = []
    for arc in arcs:
        prob = DriftEigenproblem(manifold, K_cut[arc][:, arc].tocsr(), mass[arc], arc, "dirichlet")
        vals.append(solve(prob, min(count, max(arc.size // 4, 1))).eigenvalues)
    merged = np.sort(np.concatenate(vals))
    if merged.size < count:
        raise PreconditionError(f"only {merged.size} Dirichlet eigenvalues resolvable inside B_{r}")
    return merged[:count]


# ----------------------------------------------------------------------------
# counting, stability, growth, nodal domains
# ----------------------------------------------------------------------------


class CountingFunction:
    """N(mu) = #{mu_i <= mu}, counted with multiplicity."""

    def __init__(self, eigenvalues, complete_to: float | None = None):
        self.eigenvalues = np.sort(np.asarray(eigenvalues, dtype=float))
        # N is exact on [0, complete_to]; by default only up to the largest eigenvalue
        self.complete_to = float(self.eigenvalues[-1]) if complete_to is None and self.eigenvalues.size else complete_to

    @classmethod
    def from_closed_form(cls, spectrum: CylinderClosedFormSpectrum, mu_max: float | None = None) -> "CountingFunction":
        return cls(spectrum.eigenvalues(), mu_max)

    def __call__(self, mu):
        return np.searchsorted(self.eigenvalues, np.asarray(mu, dtype=float), side="right")


@dataclass
class CountingFit:
    slope: float
    max_ratio: float
    argmax_mu: float


def fit_counting_exponent(counting: CountingFunction, mu_range, entropy_value: float, n: int,
                          samples: int = 400) -> CountingFit:
    """Log-log slope of N over ``mu_range`` and max of N / (lambda mu^n) over [1, mu_max]."""
    lo, hi = mu_range
    if counting.eigenvalues.size == 0 or hi > counting.complete_to + 1e-12:
        raise PreconditionError("insufficient eigenvalues for the requested range")
    if hi < 10 * lo * (1 - 1e-12):
        raise PreconditionError("mu_range must span at least one decade")
    mus = np.geomspace(lo, hi, samples)
    slope = np.polyfit(np.log(mus), np.log(counting(mus)), 1)[0]
    grid = np.unique(np.concatenate([counting.eigenvalues[(counting.eigenvalues >= 1) & (counting.eigenvalues <= hi)], [1.0]]))
    ratios = counting(grid) / (entropy_value * grid ** n)
    i = int(np.argmax(ratios))
    return CountingFit(float(slope), float(ratios[i]), float(grid[i]))


def cluster_multiplicity(eigenvalues, mu: float, window: float | None = None) -> int:
    window = cluster_tol(mu) if window is None else window
    return int(np.sum(np.abs(np.asarray(eigenvalues) - mu) <= window))


@dataclass
class StabilityReport:
    max_distance: float
    multiplicity_a: int
    multiplicity_b: int


def stability_compare(spec_a, spec_b, k: int, mu: float = 0.5, window: float | None = None) -> StabilityReport:
    a, b = np.asarray(spec_a, dtype=float), np.asarray(spec_b, dtype=float)
    if a.size < k or b.size < k:
        raise PreconditionError(f"need at least {k} eigenvalues in each spectrum")
    dist = float(np.max(np.abs(a[:k] - b[:k])))
    return StabilityReport(dist, cluster_multiplicity(a, mu, window), cluster_multiplicity(b, mu, window))


@dataclass
class GrowthEnvelope:
    radii: np.ndarray
    ratios: np.ndarray
    constant: float
    log_slope: float


def growth_envelope_check(manifold: SampledManifold, u, mu: float, radii, margin: float = 1.0) -> GrowthEnvelope:
    """sup over B_r of u^2 / ((4 + |x|^2)^{2 mu} |u|^2) for each r, with its log-log slope."""
    u = np.asarray(u, dtype=float)
    radii = np.asarray(radii, dtype=float)
    reach = float(np.sqrt(manifold.sq_norms.max()))
    if radii.max() > reach - margin:
        raise PreconditionError(f"radius {radii.max()} beyond sampled region (reach {reach:.3g} minus margin)")
    norm = weighted_norm_sq(manifold, u)
    pointwise = u ** 2 / ((4 + manifold.sq_norms) ** (2 * mu) * norm)
    ratios = np.array([pointwise[manifold.ball_mask(r)].max() for r in radii])
    slope = float(np.polyfit(np.log(radii), np.log(ratios), 1)[0]) if radii.size > 1 else 0.0
    return GrowthEnvelope(radii, ratios, float(ratios.max()), slope)


def nodal_domains(curve: SampledCurve, u=None, normal=None, zero_tol: float = 1e-10) -> int:
    """Number of sign components of u (or of <x, normal>) along a curve."""
    if u is None:
        if normal is None:
            raise PreconditionError("give node values or a hyperplane normal")
        u = curve.nodes @ np.asarray(normal, dtype=float)
    u = np.asarray(u, dtype=float)
    scale = np.abs(u).max()
    if scale == 0:
        raise PreconditionError("u vanishes identically")
    signs = np.sign(u[np.abs(u) > zero_tol * scale])
    changes = int(np.sum(signs[1:] != signs[:-1]))
    if curve.closed:
        changes += int(signs[0] != signs[-1])
        return max(changes, 1)
    return changes + 1


def coordinate_gram(manifold: SampledManifold) -> np.ndarray:
    """Gaussian Gram matrix of {1, x_1, ..., x_{n+1}} in the manifold's own frame."""
    if isinstance(manifold, CylinderSamples):
        coords = manifold.local_coords
    else:
        coords = manifold.nodes
    funcs = [np.ones(manifold.num_nodes)] + [coords[:, i] for i in range(coords.shape[1])]
    return gram_matrix(manifold, funcs)


def expected_cylinder_gram(k: int, n: int) -> np.ndarray:
    """diag lambda(S^k) (1, 2k/(k+1) x (k+1), 2 x (n-k))."""
    from .geometry import sphere_entropy

    diag = [1.0] + [2 * k / (k + 1)] * (k + 1) + [2.0] * (n - k)
    return sphere_entropy(k) * np.diag(diag)

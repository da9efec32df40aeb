"""Curve shortening flow in R^N with caloric transport and backward-Gaussian functionals.

Markers move by the discrete curvature vector (the arclength Laplacian of
position), and every transported field is advanced by the same Laplacian,
so a field that starts as a coordinate stays equal to that coordinate up to
round-off.  On a uniformly spaced curve the tangential part of the discrete
velocity is O(h^2).

Functionals are taken with respect to a space-time centre (x0, t0):

    I_u(t)    = (-4 pi tau)^{-1/2} int u^2 exp(|x - x0|^2 / (4 tau)),  tau = t - t0 < 0
    J_t(u, v) = the associated bilinear form.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.spatial.distance import pdist

from .errors import NotCertifiedError, PreconditionError, SingularityError
from .geometry import SampledCurve, remesh

# ----------------------------------------------------------------------------
# states and stepping
# ----------------------------------------------------------------------------


@dataclass
class FlowState:
    t: float
    curve: SampledCurve
    fields: dict = field(default_factory=dict)
    generation: int = 0  # bumped on every remesh; functionals are not differentiable across one

    def __post_init__(self):
        for name, values in self.fields.items():
            if np.shape(values)[0] != self.curve.num_nodes:
                raise PreconditionError(f"field {name!r} is not defined at every node")


@dataclass
class FlowControls:
    scheme: str = "explicit"  # or "implicit" (backward Euler, frozen Laplacian)
    cfl: float = 0.2  # dt = cfl * h_min^2
    remesh_ratio: float = 1.5  # remesh once max/min edge length exceeds this
    kappa_stop: float = 50.0  # stop when max curvature * initial diameter exceeds this
    record_ratio: float = 1.02  # record each time max curvature grows by this factor
    record_every: int = 0  # additionally record every this many steps (0 = off)
    max_steps: int = 2_000_000

    def __post_init__(self):
        if self.scheme not in ("explicit", "implicit"):
            raise PreconditionError(f"unknown scheme {self.scheme!r}")
        if self.cfl <= 0 or (self.scheme == "explicit" and self.cfl > 0.25):
            raise PreconditionError("explicit scheme needs 0 < cfl <= 0.25")


def laplacian_matrix(curve: SampledCurve) -> sp.csr_matrix:
    """Sparse matrix of ``curve.laplacian``."""
    M, E = curve.num_nodes, curve.edges.shape[0]
    rows = np.repeat(np.arange(E), 2)
    cols = np.column_stack([np.arange(E), (np.arange(E) + 1) % M]).ravel()
    D = sp.csr_matrix((np.tile([-1.0, 1.0], E), (rows, cols)), shape=(E, M))
    K = D.T @ sp.diags(1.0 / curve.edge_lengths) @ D
    return (-sp.diags(1.0 / curve.measure) @ K).tocsr()


def _pack(state: FlowState) -> tuple[np.ndarray, list]:
    names = list(state.fields)
    cols = [state.curve.nodes] + [np.asarray(state.fields[k], dtype=float).reshape(state.curve.num_nodes, -1) for k in names]
    widths = [c.shape[1] for c in cols]
    return np.hstack(cols), list(zip(names, widths[1:]))


def _unpack(data: np.ndarray, N: int, layout: list, template: dict) -> tuple[np.ndarray, dict]:
    out, col = {}, N
    for name, width in layout:
        out[name] = data[:, col:col + width].reshape(np.shape(template[name]))
        col += width
    return data[:, :N], out


def step_mcf(state: FlowState, dt: float, scheme: str = "explicit", remesh_ratio: float = 1.5) -> FlowState:
    """Advance positions and fields by one time step of x_t = Delta x, u_t = Delta u."""
    curve = state.curve
    h = curve.edge_lengths.min()
    if scheme == "explicit" and dt > 0.25 * h * h * (1 + 1e-12):
        raise PreconditionError(f"CFL violation: dt={dt:.3g} > 0.25 h^2={0.25 * h * h:.3g}")
    if scheme == "implicit" and dt > h:
        raise PreconditionError(f"CFL violation: dt={dt:.3g} > h={h:.3g}")
    data, layout = _pack(state)
    if scheme == "explicit":
        new = data + dt * curve.laplacian(data)
    else:
        A = sp.identity(curve.num_nodes, format="csc") - dt * laplacian_matrix(curve).tocsc()
        new = splu(A).solve(data)
    if not np.all(np.isfinite(new)):
        i = int(np.argmax(np.linalg.norm(curve.curvature_vector, axis=1)))
        raise SingularityError(f"non-finite state after step; blow-up near {curve.nodes[i]}")
    nodes, fields = _unpack(new, curve.ambient_dim, layout, state.fields)
    new_curve = curve.with_nodes(nodes, check=False)
    generation = state.generation
    lo, hi = new_curve.spacing_ratio
    if hi / lo > remesh_ratio:
        generation += 1
        new_curve, packed = remesh(new_curve, fields=new[:, curve.ambient_dim:] if layout else None)
        if layout:
            _, fields = _unpack(np.hstack([new_curve.nodes, packed]), curve.ambient_dim, layout, state.fields)
    return FlowState(state.t + dt, new_curve, fields, generation)


def diameter(curve: SampledCurve) -> float:
    return float(pdist(curve.nodes).max())


def max_curvature(curve: SampledCurve) -> float:
    return float(np.linalg.norm(curve.curvature_vector, axis=1).max())


@dataclass
class Trajectory:
    states: list
    controls: FlowControls
    T: float | None = None
    p: np.ndarray | None = None
    dt_min: float = np.inf
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def field_names(self) -> list:
        return list(self.states[0].fields) if self.states else []

    def nearest(self, t: float) -> FlowState:
        return self.states[int(np.argmin(np.abs(self.times - t)))]


def run_flow(initial: SampledCurve, fields: dict | None = None, controls: FlowControls | None = None,
             t0: float = 0.0, t_end: float | None = None) -> Trajectory:
    """Flow a closed curve until ``t_end`` or until curvature blow-up.

    Without ``t_end`` the run stops once max curvature times the initial
    diameter exceeds ``controls.kappa_stop`` and the singular time and point
    are estimated.
    """
    controls = controls or FlowControls()
    if not initial.closed:
        raise PreconditionError("flow runs need a closed initial curve")
    state = FlowState(t0, initial, dict(fields or {}))
    D0 = diameter(initial)
    kappa = max_curvature(initial)
    states = [state]
    next_record = kappa * controls.record_ratio
    dt_min = np.inf
    steps = 0
    while True:
        h = state.curve.edge_lengths.min()
        dt = controls.cfl * h * h
        stop_time = False
        if t_end is not None and state.t + dt >= t_end:
            dt, stop_time = t_end - state.t, True
        if dt <= 0:
            break
        state = step_mcf(state, dt, controls.scheme, controls.remesh_ratio)
        dt_min = min(dt_min, dt)
        steps += 1
        kappa = max_curvature(state.curve)
        singular = t_end is None and kappa * D0 > controls.kappa_stop
        if stop_time or singular or kappa >= next_record or (controls.record_every and steps % controls.record_every == 0):
            states.append(state)
            while next_record <= kappa:
                next_record *= controls.record_ratio
        if stop_time or singular:
            break
        if steps >= controls.max_steps:
            raise SingularityError(f"step budget of {controls.max_steps} exhausted at t={state.t:.6g}")
    traj = Trajectory(states, controls, dt_min=dt_min, meta={"steps": steps, "initial_diameter": D0})
    if t_end is None:
        traj.T, traj.p = estimate_singularity(traj)
        traj.meta.update(T=traj.T, p=[float(v) for v in traj.p])
    return traj


def run_to_singularity(initial: SampledCurve, fields: dict | None = None,
                       controls: FlowControls | None = None, t0: float = 0.0) -> Trajectory:
    return run_flow(initial, fields, controls, t0, None)


def transport_caloric(initial: SampledCurve, u0, t_end: float, controls: FlowControls | None = None,
                      t0: float = 0.0, name: str = "u") -> Trajectory:
    """Carry a caloric field along the flow from ``t0`` to ``t_end``."""
    return run_flow(initial, {name: np.asarray(u0, dtype=float)}, controls, t0, t_end)


def estimate_singularity(traj: Trajectory, tail: int = 8) -> tuple[float, np.ndarray]:
    """Extrapolate kappa_max^{-2} ~ 2 (T - t) linearly over the last records."""
    recs = traj.states[-tail:]
    t = np.array([s.t for s in recs])
    y = np.array([max_curvature(s.curve) ** -2 for s in recs])
    slope, icpt = np.polyfit(t, y, 1)
    T = float(-icpt / slope)
    last = traj.states[-1].curve
    p = (last.measure @ last.nodes) / last.measure.sum()
    return T, p


def self_similar_trajectory(base: SampledCurve, times, caloric: dict | None = None) -> Trajectory:
    """Exact states sqrt(-t) * base with fields (-t)^mu u for ``caloric = {name: (u, mu)}``."""
    caloric = caloric or {}
    states = []
    for t in times:
        if t >= 0:
            raise PreconditionError("self-similar times must be negative")
        fields = {k: (-t) ** mu * np.asarray(u, dtype=float) for k, (u, mu) in caloric.items()}
        states.append(FlowState(float(t), base.with_nodes(np.sqrt(-t) * base.nodes, check=False), fields))
    traj = Trajectory(states, FlowControls(), T=0.0, p=np.zeros(base.ambient_dim))
    traj.meta["self_similar"] = True
    return traj


# ----------------------------------------------------------------------------
# rescaled diagnostics
# ----------------------------------------------------------------------------


@dataclass
class RescaleDiagnostics:
    t: float
    tau: float
    singular_values: np.ndarray
    planarity: float
    circularity: float


def diagnose_state(state: FlowState, T: float, p) -> RescaleDiagnostics:
    """Planarity sigma_3/sigma_1 and circularity of (M_t - p)/sqrt(T - t)."""
    tau = T - state.t
    if tau <= 0:
        raise PreconditionError("state is at or past the singular time")
    y = (state.curve.nodes - np.asarray(p)) / np.sqrt(tau)
    centred = y - y.mean(axis=0)
    _, s, vt = np.linalg.svd(centred, full_matrices=False)
    planarity = float(s[2] / s[0]) if s.size > 2 else 0.0
    plane = vt[:2].T
    circ = float(np.max(np.abs(np.linalg.norm(y @ plane, axis=1) - np.sqrt(2.0))))
    return RescaleDiagnostics(state.t, tau, s, planarity, circ)


def rescale_and_diagnose(traj: Trajectory, T: float | None = None, p=None, fraction: float = 1e-3,
                         t_start: float | None = None) -> RescaleDiagnostics:
    """Diagnostics on the recorded state closest (in log(T - t)) to T - t = fraction (T - t_start)."""
    T = traj.T if T is None else T
    p = traj.p if p is None else p
    t_start = traj.states[0].t if t_start is None else t_start
    target = fraction * (T - t_start)
    if target < 10 * traj.dt_min:
        raise PreconditionError("under-resolved tail: requested window is below 10 dt_min")
    taus = T - traj.times
    valid = taus > 0
    if not np.any(valid):
        raise PreconditionError("no recorded state before the singular time")
    idx = np.flatnonzero(valid)[np.argmin(np.abs(np.log(taus[valid] / target)))]
    return diagnose_state(traj.states[idx], T, p)


# ----------------------------------------------------------------------------
# backward Gaussian functionals
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Center:
    x0: np.ndarray
    t0: float = 0.0

    @classmethod
    def of(cls, traj: Trajectory) -> "Center":
        return cls(np.asarray(traj.p if traj.p is not None else 0.0, dtype=float), float(traj.T or 0.0))


class Slice:
    """Gaussian quantities on a single state relative to a space-time centre."""

    def __init__(self, state: FlowState, center: Center):
        self.state = state
        self.curve = state.curve
        self.tau = state.t - center.t0
        if self.tau >= 0:
            raise PreconditionError("functionals need t < t0")
        self.x = state.curve.nodes - np.broadcast_to(center.x0, (state.curve.ambient_dim,))
        self.rho = (-4 * np.pi * self.tau) ** -0.5 * np.exp(np.sum(self.x ** 2, axis=1) / (4 * self.tau)) * self.curve.measure

    def values(self, u) -> np.ndarray:
        if isinstance(u, str):
            return np.asarray(self.state.fields[u], dtype=float)
        return np.asarray(u, dtype=float)

    def J(self, u, v) -> float:
        return float(np.sum(self.values(u) * self.values(v) * self.rho))

    def I(self, u) -> float:
        return self.J(u, u)

    def grad_energy(self, u) -> float:
        return float(np.sum(self.curve.grad_sq(self.values(u)) * self.rho))

    @property
    def x_perp(self) -> np.ndarray:
        return self.curve.normal_part(self.x)

    @property
    def phi(self) -> np.ndarray:
        """H + x^perp/(2 tau) with H = -(curvature vector)."""
        return -self.curve.curvature_vector + self.x_perp / (2 * self.tau)

    def phi_energy(self, u=None) -> float:
        u2 = 1.0 if u is None else self.values(u) ** 2
        return float(np.sum(u2 * np.sum(self.phi ** 2, axis=1) * self.rho))

    def derivative_rhs(self, u) -> float:
        """-(4 pi (-tau))^{-1/2} int (2 |grad u|^2 + u^2 |phi|^2) e^{|x|^2/4tau}."""
        return -(2 * self.grad_energy(u) + self.phi_energy(u))

    def localization_slack(self, u) -> float:
        u = self.values(u)
        lhs = float(np.sum(np.sum(self.x ** 2, axis=1) * u ** 2 * self.rho)) / (-self.tau)
        rhs = 4 * self.curve.dim * self.I(u) - 4 * self.tau * (4 * self.grad_energy(u) + self.phi_energy(u))
        return rhs - lhs

    def gram(self, funcs) -> np.ndarray:
        F = np.column_stack([self.values(f) for f in funcs])
        return (F.T * self.rho) @ F


@dataclass
class FunctionalSeries:
    times: np.ndarray  # shifted, tau = t - t0
    I: dict
    J: dict
    rhs: dict
    fd: dict
    generation: np.ndarray

    def smooth_steps(self) -> np.ndarray:
        """Mask of consecutive sample pairs not separated by a remesh."""
        return np.diff(self.generation) == 0

    def max_increase(self, name: str) -> float:
        """Largest relative step increase of I over remesh-free sample pairs."""
        I = self.I[name]
        inc = np.diff(I) / np.abs(I[:-1])
        return float(np.max(inc[self.smooth_steps()], initial=-np.inf))

    def rows(self):
        names = list(self.I)
        for j, tau in enumerate(self.times):
            row = {"t": float(tau)}
            row["generation"] = int(self.generation[j])
            for k in names:
                row[f"I_{k}"] = float(self.I[k][j])
                row[f"dI_{k}"] = float(self.fd[k][j])
                row[f"rhs_{k}"] = float(self.rhs[k][j])
            for (a, b), vals in self.J.items():
                row[f"J_{a}_{b}"] = float(vals[j])
            yield row


def fd_derivative(t: np.ndarray, y: np.ndarray, generation=None) -> np.ndarray:
    """Second-order derivative on a nonuniform grid.

    NaN at the ends and wherever the three-point stencil straddles a remesh.
    """
    out = np.full_like(y, np.nan, dtype=float)
    if t.size >= 3:
        out[1:-1] = np.gradient(y, t)[1:-1]
    if generation is not None:
        g = np.asarray(generation)
        straddle = np.zeros(y.shape, dtype=bool)
        straddle[1:-1] = (g[:-2] != g[1:-1]) | (g[2:] != g[1:-1])
        out[straddle] = np.nan
    return out


def gaussian_functionals(traj: Trajectory, names=None, pairs=(), center: Center | None = None) -> FunctionalSeries:
    center = center or Center.of(traj)
    names = traj.field_names() if names is None else list(names)
    slices = [Slice(s, center) for s in traj.states]
    taus = np.array([sl.tau for sl in slices])
    I = {k: np.array([sl.I(k) for sl in slices]) for k in names}
    rhs = {k: np.array([sl.derivative_rhs(k) for sl in slices]) for k in names}
    gen = np.array([s.generation for s in traj.states])
    fd = {k: fd_derivative(taus, I[k], gen) for k in names}
    J = {(a, b): np.array([sl.J(a, b) for sl in slices]) for a, b in pairs}
    return FunctionalSeries(taus, I, J, rhs, fd, gen)


def derivative_mismatch(series: FunctionalSeries, name: str, floor: float = 0.0) -> np.ndarray:
    """|FD dI/dt - rhs| / max(|rhs|, floor) at samples with a valid stencil."""
    ok = np.isfinite(series.fd[name])
    fd, rhs = series.fd[name][ok], series.rhs[name][ok]
    return np.abs(fd - rhs) / np.maximum(np.abs(rhs), floor)


# ----------------------------------------------------------------------------
# span rank, orthogonalization, good scales
# ----------------------------------------------------------------------------


def coordinate_span_rank(traj: Trajectory, indices=None, tol: float = 1e-2, center: Center | None = None):
    """Rank of sum_j Gram_{J_{t_j}}{1, (x_i - p_i)/sqrt(-tau_j)} counted relative to its top eigenvalue."""
    center = center or Center.of(traj)
    indices = range(len(traj.states)) if indices is None else indices
    if len(list(indices)) < 2:
        raise PreconditionError("need at least two sample times")
    G = 0.0
    for i in indices:
        sl = Slice(traj.states[i], center)
        y = sl.x / np.sqrt(-sl.tau)
        G = G + sl.gram([np.ones(sl.curve.num_nodes)] + [y[:, j] for j in range(y.shape[1])])
    eig = np.linalg.eigvalsh(G)[::-1]
    return int(np.sum(eig > tol * eig[0])), eig


@dataclass
class OrthogonalizationLedger:
    t0: float
    coefficients: np.ndarray  # unit lower triangular; w = coefficients @ u
    f: np.ndarray  # f_i(t0) = I_{w_i}(t0)
    gram: np.ndarray

    def w(self, slice_or_values) -> np.ndarray:
        """Orthogonalized fields (rows) given stacked base values (ell+1, M)."""
        return self.coefficients @ slice_or_values


def orthogonalize_at_scale(state: FlowState, funcs, center: Center, max_cond: float = 1e8) -> OrthogonalizationLedger:
    """Gram-Schmidt of ``funcs`` (first entry the constant) in the J_{t0} form."""
    sl = Slice(state, center)
    G = sl.gram(funcs)
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > max_cond:
        raise PreconditionError(f"singular Gram matrix (condition {cond:.3g})")
    C = np.linalg.cholesky(G)
    d = np.diag(C)
    L = C / d[None, :]  # unit lower triangular, G = L diag(d^2) L^T
    A = np.linalg.inv(L)
    return OrthogonalizationLedger(state.t, A, d ** 2, G)


def stacked(state: FlowState, funcs) -> np.ndarray:
    return np.vstack([np.asarray(state.fields[f] if isinstance(f, str) else f, dtype=float) for f in funcs])


@dataclass
class GoodScaleReport:
    a: np.ndarray
    qualifying: list
    sums: dict  # m -> sum_i I_{v_i}(-Omega^m)
    bound: float
    growth_trace: np.ndarray
    growth_fits: list = field(default_factory=list)  # per non-constant field: (T_i, C_i)

    @property
    def min_slack(self) -> float:
        return min((s - self.bound for s in self.sums.values()), default=float("nan"))


def select_good_scales(f_series: np.ndarray, omega: float, delta: float, d: float) -> tuple[list, np.ndarray]:
    """Indices m with a_{m+1} <= Omega^{d ell + delta} a_m where a_m = prod_i f_i(-Omega^m).

    ``f_series`` has shape (grid length, ell) and excludes the constant.
    """
    f_series = np.atleast_2d(np.asarray(f_series, dtype=float))
    if np.any(f_series <= 0):
        raise PreconditionError("all f_i must be positive")
    ell = f_series.shape[1]
    log_a = np.sum(np.log(f_series), axis=1)
    ratio = np.diff(log_a) / np.log(omega)
    qualifying = [m for m in range(len(ratio)) if ratio[m] <= d * ell + delta + 1e-12]
    return qualifying, ratio


def good_scale_experiment(traj: Trajectory, funcs, omega: float, delta: float, d: float,
                          center: Center | None = None) -> GoodScaleReport:
    """Run orthogonalization on each state (assumed on t = -Omega^m) and check the lower bound.

    For each qualifying m: v_i = w_{i, t_{m+1}} / sqrt(f_i(t_{m+1})) and the
    bound is sum_i I_{v_i}(t_m) >= ell Omega^{-d-delta}.
    """
    center = center or Center.of(traj)
    ledgers = [orthogonalize_at_scale(s, funcs, center) for s in traj.states]
    f = np.array([lg.f[1:] for lg in ledgers])
    qualifying, ratio = select_good_scales(f, omega, delta, d)
    ell = f.shape[1]
    bound = ell * omega ** (-d - delta)
    sums = {}
    for m in qualifying:
        later = ledgers[m + 1]
        base_now = stacked(traj.states[m], funcs)
        v = later.w(base_now)[1:] / np.sqrt(later.f[1:, None])
        sl = Slice(traj.states[m], center)
        sums[m] = float(sum(sl.I(row) for row in v))
    a = np.exp(np.sum(np.log(f), axis=1))
    # empirical f_i(t) <= C_i (1 - t)^d over the sampled times t <= T_i
    times = np.array([s.t for s in traj.states]) - center.t0
    fits = [(float(times.max()), float(np.max(f[:, i] / (1 - times) ** d))) for i in range(ell)]
    return GoodScaleReport(a, qualifying, sums, bound, ratio, fits)


# ----------------------------------------------------------------------------
# near-orthogonality, growth lemmas, zeta projection, Poincare, drift identity
# ----------------------------------------------------------------------------


def _mean_zero(sl: Slice, u) -> np.ndarray:
    u = sl.values(u)
    return u - sl.J(u, 1.0) / sl.I(1.0)


def near_orthogonality_drift(traj: Trajectory, name: str, i1: int, i2: int, center: Center | None = None,
                             scale: float = 1.0) -> tuple[float, float]:
    """|J_{t2}(u,1)|^2 against I_u(t1) |I_1(t1) - I_1(t2)| for u made mean-zero at t1."""
    center = center or Center.of(traj)
    s1, s2 = Slice(traj.states[i1], center), Slice(traj.states[i2], center)
    shift = s1.J(name, 1.0) / s1.I(1.0)
    u1 = scale * (s1.values(name) - shift)
    u2 = scale * (s2.values(name) - shift)
    lhs = s2.J(u2, 1.0) ** 2
    rhs = s1.I(u1) * abs(s1.I(1.0) - s2.I(1.0))
    return lhs, rhs


def plane_coordinates(sl: Slice, count: int = 2) -> np.ndarray:
    """Coordinates (M, count) along the best-fit ``count``-plane through the centre."""
    _, _, vt = np.linalg.svd(sl.x - (sl.rho @ sl.x) / sl.rho.sum(), full_matrices=False)
    return sl.x @ vt[:count].T


@dataclass
class GrowthReport:
    mode: str
    lhs: float
    rhs: float
    kappa: np.ndarray

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def kappa_vector(s1: Slice, s2: Slice, coords1: np.ndarray, coords2: np.ndarray) -> np.ndarray:
    k0 = abs(s1.I(1.0) - s2.I(1.0))
    ki = [abs(s1.I(coords1[:, i]) / s1.tau - s2.I(coords2[:, i]) / s2.tau) for i in range(coords1.shape[1])]
    return np.array([k0] + ki)


def growth_experiment(traj: Trajectory, name: str, i1: int, i2: int, mode: str, mu: float,
                      center: Center | None = None, c_prime: float = 1.0, lambda0: float | None = None,
                      planarity_tol: float = 1e-2, circularity_tol: float = 2e-2,
                      orth_tol: float = 1e-8) -> GrowthReport:
    """Compare I_u(t2) (with I_u(t1) = 1) to the linear or quadratic growth bound."""
    center = center or Center.of(traj)
    for i in (i1, i2):
        diag = diagnose_state(traj.states[i], center.t0, center.x0)
        if diag.planarity > planarity_tol or diag.circularity > circularity_tol:
            raise NotCertifiedError(
                f"state {i} not near-circular (planarity {diag.planarity:.3g}, circularity {diag.circularity:.3g})"
            )
    s1, s2 = Slice(traj.states[i1], center), Slice(traj.states[i2], center)
    norm = np.sqrt(s1.I(name))
    u1, u2 = s1.values(name) / norm, s2.values(name) / norm
    c1, c2 = plane_coordinates(s1), plane_coordinates(s2)
    checks = [s1.J(u1, 1.0)] + ([s1.J(u1, c1[:, i]) for i in range(c1.shape[1])] if mode == "quadratic" else [])
    if max(abs(c) for c in checks) > orth_tol:
        raise PreconditionError("u must be J_{t1}-orthogonal to the required functions")
    ratio = s1.tau / s2.tau
    kappa = kappa_vector(s1, s2, c1, c2)
    lhs = s2.I(u2)
    if mode == "linear":
        rhs = ratio ** (mu - 1) + 2 * kappa[0]
    elif mode == "quadratic":
        lam = lambda0 if lambda0 is not None else max(s1.I(1.0), s2.I(1.0))
        rhs = ratio ** (2 * mu - 2) + c_prime * (2 + 1 / mu) * lam ** 2 * np.sqrt(np.linalg.norm(kappa)) * ratio ** 2
    else:
        raise PreconditionError(f"unknown growth mode {mode!r}")
    return GrowthReport(mode, float(lhs), float(rhs), kappa)


@dataclass
class ZetaProjection:
    zeta: np.ndarray
    a: np.ndarray
    v: np.ndarray
    gram: np.ndarray
    I_u: float
    I_v: float
    orthogonality_defect: float

    @property
    def zeta_sq(self) -> float:
        return float(self.zeta @ self.zeta)


def zeta_projection(state: FlowState, u, center: Center, coords: np.ndarray | None = None,
                    max_cond: float = 1e8) -> ZetaProjection:
    """Project u off span{1, x_i/sqrt(-t)} in the J_t form."""
    sl = Slice(state, center)
    u = sl.values(u)
    coords = plane_coordinates(sl) if coords is None else np.asarray(coords, dtype=float)
    basis = [np.ones_like(u)] + [coords[:, i] / np.sqrt(-sl.tau) for i in range(coords.shape[1])]
    g = sl.gram(basis)
    eig = np.linalg.eigvalsh(g)
    if eig[0] <= 0 or eig[-1] / eig[0] > max_cond:
        raise PreconditionError("Gram matrix of the projection basis is ill-conditioned")
    zeta = np.array([sl.J(u, b) for b in basis])
    a = np.linalg.solve(g, zeta)
    v = u - sum(ai * b for ai, b in zip(a, basis))
    defect = max(abs(sl.J(v, b)) for b in basis)
    return ZetaProjection(zeta, a, v, g, sl.I(u), sl.I(v), defect)


def poincare_check(state: FlowState, u, center: Center, mu: float = 0.1, variant: str = "A",
                   orth_tol: float = 1e-8) -> tuple[float, float]:
    """Return (lhs, rhs) for (1-mu) I_u <= c (-t) int |grad u|^2 with c = 2 (A) or 1 (B)."""
    sl = Slice(state, center)
    u = sl.values(u)
    scale = np.sqrt(sl.I(u))
    basis = [np.ones_like(u)]
    if variant == "B":
        coords = plane_coordinates(sl)
        basis += [coords[:, i] / np.sqrt(-sl.tau) for i in range(coords.shape[1])]
    elif variant != "A":
        raise PreconditionError(f"unknown Poincare variant {variant!r}")
    if max(abs(sl.J(u, b)) for b in basis) > orth_tol * scale * np.sqrt(sl.I(1.0)):
        raise PreconditionError("u does not satisfy the orthogonality hypothesis")
    c = 2.0 if variant == "A" else 1.0
    return (1 - mu) * sl.I(u), c * (-sl.tau) * sl.grad_energy(u)


def drift_identity_residual(state: FlowState, V, center: Center) -> float:
    """max |L_t v - (v/(2 tau) - <phi, V>)| for v = <x, V> at interior nodes."""
    sl = Slice(state, center)
    V = np.asarray(V, dtype=float)
    v = sl.x @ V
    curve = sl.curve
    x_tan = np.einsum("ij,ij->i", sl.x, curve.tangents)
    Lv = curve.laplacian(v) + curve.gradient(v) * x_tan / (2 * sl.tau)
    target = v / (2 * sl.tau) - sl.phi @ V
    return float(np.abs(Lv - target)[curve.interior_mask].max())


def trajectory_with_fields(traj: Trajectory, **fields) -> Trajectory:
    """Copy of ``traj`` with extra per-state fields given as callables of the state."""
    states = [FlowState(s.t, s.curve, {**s.fields, **{k: f(s) for k, f in fields.items()}}) for s in traj.states]
    return replace(traj, states=states)

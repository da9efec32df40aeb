"""Gaussian-weighted integrals: F, entropy and the static weighted inequalities."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import NotCertifiedError, PreconditionError
from .geometry import SampledManifold


def _check_values(manifold: SampledManifold, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[0] != manifold.num_nodes:
        raise PreconditionError(f"expected {manifold.num_nodes} node values, got {u.shape[0]}")
    return u


def _require_certified(manifold: SampledManifold) -> None:
    closed = getattr(manifold, "closed", True)
    if not closed and not manifold.tail_certified:
        raise NotCertifiedError("open manifold without a tail certificate; refusing Gaussian integral")


def f_functional(manifold: SampledManifold, scale: float = 1.0, shift=None) -> float:
    """F(c Sigma + x0) = (4 pi)^{-n/2} int e^{-|x|^2/4}."""
    _require_certified(manifold)
    shift = np.zeros(manifold.ambient_dim) if shift is None else np.asarray(shift, dtype=float)
    return float(manifold.gaussian_area([scale], shift[None])[0])


def weighted_inner(manifold: SampledManifold, u, v) -> float:
    u, v = _check_values(manifold, u), _check_values(manifold, v)
    return manifold.normalization * float(np.sum(u * v * manifold.weights))


def weighted_norm_sq(manifold: SampledManifold, u) -> float:
    return weighted_inner(manifold, u, u)


def gram_matrix(manifold: SampledManifold, funcs) -> np.ndarray:
    F = np.column_stack([_check_values(manifold, f) for f in funcs])
    return manifold.normalization * (F.T * manifold.weights) @ F


@dataclass
class EntropyReport:
    value: float
    scale: float
    shift: np.ndarray
    trace: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "lambda": self.value,
                "c": self.scale,
                "x0": [float(v) for v in self.shift],
                "trace": [{"stage": s, "lambda": v} for s, v in self.trace],
            }
        )


def entropy(manifold: SampledManifold, coarse: int = 21, refine_iters: int = 30,
            scale_range=(0.2, 5.0), shift_box: float = 6.0) -> EntropyReport:
    """Maximize F(c Sigma + x0) over c and x0 in (up to 3 directions of) the affine hull.

    A coarse grid scan is followed by coordinate-wise bounded golden-section
    ascent.  The best value only ever increases, so the trace is monotone.
    """
    _require_certified(manifold)
    _, basis = manifold.affine_frame()
    basis = basis[:, :3]
    dirs = basis.shape[1]

    log_c = np.linspace(np.log(scale_range[0]), np.log(scale_range[1]), coarse)
    offs = np.linspace(-shift_box, shift_box, coarse)
    mesh = np.meshgrid(log_c, *([offs] * dirs), indexing="ij")
    params = np.column_stack([m.ravel() for m in mesh])

    def evaluate(p: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(p)
        return manifold.gaussian_area(np.exp(p[:, 0]), p[:, 1:] @ basis.T)

    values = np.concatenate([evaluate(params[i:i + 4096]) for i in range(0, len(params), 4096)])
    best_i = int(np.argmax(values))
    best, best_val = params[best_i].copy(), float(values[best_i])
    trace = [("grid", best_val)]

    lo = np.concatenate([[log_c[0]], np.full(dirs, -shift_box)])
    hi = np.concatenate([[log_c[-1]], np.full(dirs, shift_box)])
    step = np.concatenate([[log_c[1] - log_c[0]], np.full(dirs, offs[1] - offs[0])])
    for _ in range(refine_iters):
        start_val = best_val
        for j in range(best.size):
            a, b = max(lo[j], best[j] - step[j]), min(hi[j], best[j] + step[j])

            def neg(x, j=j):
                p = best.copy()
                p[j] = x
                return -float(evaluate(p)[0])

            res = minimize_scalar(neg, bounds=(a, b), method="bounded", options={"xatol": 1e-10})
            if -res.fun > best_val:
                best[j], best_val = res.x, -res.fun
        trace.append(("refine", best_val))
        step *= 0.5
        if best_val - start_val <= 1e-14 * best_val and step.max() < 1e-6:
            break
    return EntropyReport(best_val, float(np.exp(best[0])), basis @ best[1:], trace)


def ball_volume(manifold: SampledManifold, r: float) -> float:
    """Unweighted volume of the part of the manifold inside B_r."""
    return float(np.sum(manifold.measure[manifold.ball_mask(r)]))


def volume_ratios(manifold: SampledManifold, radii, entropy_value: float) -> list[tuple[float, float]]:
    """(r, lambda / vol(B_r)) for r > sqrt(4n).  Recorded only; no bound is implied."""
    floor = np.sqrt(4 * manifold.dim)
    if np.min(radii) <= floor:
        raise PreconditionError(f"radii must exceed sqrt(4n) = {floor:.4g}")
    return [(float(r), entropy_value / ball_volume(manifold, r)) for r in radii]


def dirichlet_energy(manifold: SampledManifold, u) -> float:
    """Normalized int |grad u|^2 e^{-f}."""
    u = _check_values(manifold, u)
    return manifold.dirichlet_form(u, u)


def localization_slack(manifold: SampledManifold, u) -> float:
    """4n int u^2 + 16 int |grad u|^2 - int |x|^2 u^2 (all Gaussian weighted)."""
    u = _check_values(manifold, u)
    l2 = weighted_norm_sq(manifold, u)
    moment = weighted_inner(manifold, manifold.sq_norms * u, u)
    return 4 * manifold.dim * l2 + 16 * dirichlet_energy(manifold, u) - moment


def tail_mass_check(manifold: SampledManifold, u, mu: float, r: float, norm_tol: float = 1e-6):
    """Weighted (u^2 + |grad u|^2) mass outside B_r against (6+mu^2) 4(n+4mu)/(r-1)^2."""
    u = _check_values(manifold, u)
    if r <= 2:
        raise PreconditionError("tail_mass_check needs r > 2")
    norm = weighted_norm_sq(manifold, u)
    if abs(norm - 1.0) > norm_tol:
        raise PreconditionError(f"u must be L2-normalized (|u|^2 = {norm:.6g})")
    outside = ~manifold.ball_mask(r)
    density = (u ** 2 + manifold.grad_sq(u)) * manifold.weights
    lhs = manifold.normalization * float(np.sum(density[outside]))
    rhs = (6 + mu ** 2) * 4 * (manifold.dim + 4 * mu) / (r - 1) ** 2
    return lhs, rhs

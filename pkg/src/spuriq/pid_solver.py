"""Unique information via convex minimization over the marginal-matching polytope.

Minimizing I_Q(Y;B|F) over the set of joints Q that match the true (Y,F) and
(Y,B) marginals is equivalent to maximizing H_Q(Y|F,B) over a product of
per-y transportation polytopes, since H_Q(Y|F) is pinned by the constraints.
The same maximizer yields both unique informations, which is what makes the
four-term decomposition consistent across two independent solver runs.

The solver is Frank-Wolfe with pairwise (away) steps over an explicit atom
set; every linear subproblem is an exact transportation LP. The duality gap
is reported in bits and certifies the distance to the optimum.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from spuriq._transport import transport_lp
from spuriq.dist_core import (
    JointPMF3,
    conditional_mutual_information,
    joint_mutual_information,
    marginalize,
    mutual_information,
)

__all__ = [
    "FeasiblePoint",
    "PidResult",
    "SolverConfig",
    "SolverDiagnostics",
    "brute_force_unique",
    "pid_decompose",
    "solve_unique_information",
]

_TINY = 1e-300
# The objective is non-differentiable where whole (f,b) columns are empty, so
# iterates keep a vanishing admixture of the strictly positive product
# coupling. Gradients stay finite and the duality gap stays a valid
# certificate; the admixture shrinks with the square of the gap, so its
# offset never limits the attainable tolerance.
_INTERIOR_MIX = 1e-12
_ALGORITHMS = ("corrective-fw", "fw")
_INITS = ("product",)


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rule and algorithm selection for the unique-information solver."""

    gap_tol: float = 1e-9  # bits
    max_iterations: int = 100_000
    algorithm: str = "corrective-fw"
    init: str = "product"

    def __post_init__(self) -> None:
        if not self.gap_tol > 0:
            raise ValueError("gap_tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.algorithm not in _ALGORITHMS:
            raise ValueError(f"algorithm must be one of {_ALGORITHMS}")
        if self.init not in _INITS:
            raise ValueError(f"init must be one of {_INITS}")


@dataclass(frozen=True, eq=False)
class FeasiblePoint:
    """A joint Q matching the reference marginals; q[y] are the per-y couplings."""

    q: np.ndarray
    marginal_error: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.q, dtype=float)
        if np.any(arr < -1e-12):
            raise ValueError("feasible point has materially negative cells")
        arr = np.maximum(arr, 0.0)
        arr.setflags(write=False)
        object.__setattr__(self, "q", arr)

    def slice(self, y: int) -> np.ndarray:
        return self.q[y]


@dataclass(frozen=True)
class SolverDiagnostics:
    iterations: int
    gap: float  # bits
    wall_time: float  # seconds
    converged: bool


@dataclass(frozen=True)
class PidResult:
    """Four-term decomposition in bits; negative round-off is clamped to zero
    in the reported fields and preserved in ``raw_terms``."""

    uni_b_given_f: float
    uni_f_given_b: float
    redundancy: float
    synergy: float
    total_mi: float
    iterations: int
    gap: float
    wall_time: float
    converged: bool
    raw_terms: Mapping[str, float]

    def as_dict(self) -> dict:
        return {
            "uni_b_given_f": self.uni_b_given_f,
            "uni_f_given_b": self.uni_f_given_b,
            "redundancy": self.redundancy,
            "synergy": self.synergy,
            "total_mi": self.total_mi,
            "gap": self.gap,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


def _marginals(mass: np.ndarray):
    return mass.sum(axis=(1, 2)), mass.sum(axis=2), mass.sum(axis=1)


def _product_coupling(mass: np.ndarray) -> np.ndarray:
    p_y, p_yf, p_yb = _marginals(mass)
    q0 = np.zeros_like(mass)
    for y in np.flatnonzero(p_y > 0):
        q0[y] = np.outer(p_yf[y], p_yb[y]) / p_y[y]
    return q0


def _objective_bits(q: np.ndarray) -> float:
    """-H_Q(Y|F,B) in bits: the variable part of both conditional MIs."""
    m = q.sum(axis=0)
    qs = np.where(q > 0, q * np.log2(np.maximum(q, _TINY)), 0.0).sum()
    ms = np.where(m > 0, m * np.log2(np.maximum(m, _TINY)), 0.0).sum()
    return float(qs - ms)


def _gradient_bits(q: np.ndarray) -> np.ndarray:
    m = q.sum(axis=0)
    return np.log2(np.maximum(q, _TINY)) - np.log2(np.maximum(m, _TINY))[None, :, :]


def _lmo(grad: np.ndarray, p_yf: np.ndarray, p_yb: np.ndarray, active: np.ndarray) -> np.ndarray:
    s = np.zeros_like(grad)
    for y in active:
        s[y] = transport_lp(grad[y], p_yf[y], p_yb[y])
    return s


def _exact_step(q: np.ndarray, d: np.ndarray, gamma_max: float) -> float:
    """Exact line search along d: root of the (increasing) directional derivative."""
    dm = d.sum(axis=0)
    m = q.sum(axis=0)

    def slope(g: float) -> float:
        qq = np.maximum(q + g * d, _TINY)
        mm = np.maximum(m + g * dm, _TINY)
        return float((d * np.log(qq)).sum() - (dm * np.log(mm)).sum())

    hi = gamma_max
    if slope(hi) <= 0:
        return hi
    lo = 0.0
    g = 0.5 * hi
    for _ in range(60):
        s = slope(g)
        if s > 0:
            hi = g
        else:
            lo = g
        if hi - lo <= 1e-15 * max(1.0, gamma_max):
            break
        # Newton step on the derivative when it stays inside the bracket
        qq = np.maximum(q + g * d, _TINY)
        mm = np.maximum(m + g * dm, _TINY)
        curv = float((d * d / qq).sum() - (dm * dm / mm).sum())
        if curv > 0:
            g_new = g - s / curv
            if lo < g_new < hi:
                g = g_new
                continue
        g = 0.5 * (lo + hi)
    return 0.5 * (lo + hi)


def _key(arr: np.ndarray) -> bytes:
    return np.round(arr, 12).tobytes()


def _newton_direction(g: np.ndarray, h: np.ndarray) -> np.ndarray | None:
    """Equality-constrained Newton step (sum of changes zero), equilibrated.

    Curvature spans many orders of magnitude near the simplex boundary, so the
    system is Jacobi-scaled; callers must validate descent and feasibility.
    """
    n = g.size
    scale = 1.0 / np.sqrt(np.maximum(np.diag(h), 1e-8))
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = h * np.outer(scale, scale) + 1e-12 * np.eye(n)
    kkt[:n, n] = scale
    kkt[n, :n] = scale
    rhs = np.concatenate([-g * scale, [0.0]])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return None
    delta = sol[:n] * scale
    if not np.all(np.isfinite(delta)):
        return None
    return delta


def _optimize_weights(atoms: list[np.ndarray], weights: np.ndarray, q0: np.ndarray, mix: float):
    """Minimize the objective over the convex hull of the current atoms.

    Frank-Wolfe on the weight simplex (step toward the most attractive atom,
    exact line search) with a support-restricted Newton polish whenever the
    Newton direction is a feasible descent direction. Dimensions stay tiny:
    one coordinate per atom.
    """
    k = len(atoms)
    a = np.stack([v.ravel() for v in atoms])  # (k, cells)
    am = np.stack([v.sum(axis=0).ravel() for v in atoms])  # (k, fb)
    m0 = q0.sum(axis=0).ravel()
    w = weights.copy()

    for _ in range(200):
        q = (1.0 - mix) * (w @ a) + mix * q0.ravel()
        m = (1.0 - mix) * (w @ am) + mix * m0
        g_all = a @ np.log(np.maximum(q, _TINY)) - am @ np.log(np.maximum(m, _TINY))
        j = int(np.argmin(g_all))
        inner_gap = float(w @ g_all - g_all[j])
        if inner_gap <= 1e-11:
            break

        delta = None
        support = np.flatnonzero((w > 0) | (np.arange(k) == j))
        if support.size >= 2:
            g = g_all[support]
            h = (a[support] / np.maximum(q, _TINY)) @ a[support].T
            h -= (am[support] / np.maximum(m, _TINY)) @ am[support].T
            delta = _newton_direction(g, h)
            if delta is not None:
                bad = (w[support] <= 0) & (delta < 0)
                if bad.any() or float(g @ delta) >= 0:
                    delta = None
        if delta is not None:
            size = float(np.abs(delta).max())
            if size <= 0:
                delta = None
            else:
                delta = delta / size

        if delta is not None:
            step_cap = 1.0
            shrinking = delta < -1e-300
            if shrinking.any():
                step_cap = min(1.0, float(np.min(-w[support][shrinking] / delta[shrinking])))
            direction = np.zeros(k)
            direction[support] = delta
        else:
            # toward-best-atom step; always feasible on the simplex
            direction = -w.copy()
            direction[j] += 1.0
            step_cap = 1.0
        if step_cap <= 0:
            break

        d_full = (1.0 - mix) * (direction @ a).reshape(q0.shape)
        t = _exact_step(q.reshape(q0.shape), d_full, step_cap)
        if t <= 0:
            break
        w = np.maximum(w + t * direction, 0.0)
        total = w.sum()
        if total <= 0:
            break
        w /= total
    return w


def _minimize(mass: np.ndarray, config: SolverConfig):
    """Shared core: minimize -H_Q(Y|F,B) over the product polytope."""
    p_y, p_yf, p_yb = _marginals(mass)
    active_y = np.flatnonzero(p_y > 0)

    mix = _INTERIOR_MIX
    q0 = _product_coupling(mass)
    x = q0.copy()
    atoms: list[np.ndarray] = [q0.copy()]
    weights = np.array([1.0])
    seen = {_key(q0)}
    corrective = config.algorithm == "corrective-fw"

    gap = np.inf
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        q = (1.0 - mix) * x + mix * q0
        grad = _gradient_bits(q)
        s = _lmo(grad, p_yf, p_yb, active_y)
        gap = (1.0 - mix) * float(np.vdot(grad, x - s))
        if gap <= config.gap_tol:
            converged = True
            break

        if corrective:
            s_key = _key(s)
            if s_key not in seen:
                seen.add(s_key)
                atoms.append(s)
                weights = np.append(weights, 0.0)
            weights = _optimize_weights(atoms, weights, q0, mix)
            if len(atoms) > 32:
                # keep carrying atoms; zero-weight ones may still re-enter
                keep = weights > 0
                keep[-8:] = True
                atoms = [v for v, k in zip(atoms, keep) if k]
                weights = weights[keep]
                weights /= weights.sum()
                seen = {_key(v) for v in atoms}
            x = np.einsum("k,k...->...", weights, np.stack(atoms))
        else:
            d = s - x
            if not float(np.vdot(grad, d)) < 0:
                converged = gap <= config.gap_tol
                break
            gamma = _exact_step(q, (1.0 - mix) * d, 1.0)
            if gamma <= 0:
                converged = gap <= config.gap_tol
                break
            x = np.maximum(x + gamma * d, 0.0)
        mix = min(mix, gap * gap)

    q = (1.0 - mix) * x + mix * q0
    return q, gap, iterations, converged


def solve_unique_information(
    joint: JointPMF3, unique_axis: str, config: SolverConfig | None = None
) -> tuple[float, FeasiblePoint, SolverDiagnostics]:
    """Unique information about Y in ``unique_axis`` ("f" or "b"), in bits.

    Returns the conditional mutual information evaluated at the minimizing
    feasible point, the point itself, and solver diagnostics. Non-convergence
    within the iteration budget is flagged, not raised.
    """
    axis = unique_axis.lower()
    if axis not in ("f", "b"):
        raise ValueError("unique_axis must be 'f' or 'b'")
    cfg = config or SolverConfig()
    start = time.perf_counter()
    q, gap, iterations, converged = _minimize(joint.mass, cfg)
    wall = time.perf_counter() - start

    p_yf = joint.mass.sum(axis=2)
    p_yb = joint.mass.sum(axis=1)
    err = max(
        float(np.abs(q.sum(axis=2) - p_yf).max()),
        float(np.abs(q.sum(axis=1) - p_yb).max()),
    )
    point = FeasiblePoint(q, err)
    q_clean = np.maximum(q, 0.0)
    q_joint = JointPMF3(q_clean / q_clean.sum())
    given = "f" if axis == "b" else "b"
    value = conditional_mutual_information(q_joint, "y", given)
    return value, point, SolverDiagnostics(iterations, gap, wall, converged)


def pid_decompose(joint: JointPMF3, config: SolverConfig | None = None) -> PidResult:
    """Full four-term decomposition of I(Y;F,B) in bits.

    Both unique terms come from independent solver runs; redundancy and
    synergy follow from the marginal mutual informations.
    """
    cfg = config or SolverConfig()
    uni_b, _, diag_b = solve_unique_information(joint, "b", cfg)
    uni_f, _, diag_f = solve_unique_information(joint, "f", cfg)
    i_yf = mutual_information(marginalize(joint, "yf"))
    total = joint_mutual_information(joint)
    redundancy = i_yf - uni_f
    synergy = total - uni_f - uni_b - redundancy
    raw = {
        "uni_b_given_f": uni_b,
        "uni_f_given_b": uni_f,
        "redundancy": redundancy,
        "synergy": synergy,
    }
    clamp = lambda x: max(x, 0.0)
    return PidResult(
        uni_b_given_f=clamp(uni_b),
        uni_f_given_b=clamp(uni_f),
        redundancy=clamp(redundancy),
        synergy=clamp(synergy),
        total_mi=total,
        iterations=diag_b.iterations + diag_f.iterations,
        gap=max(diag_b.gap, diag_f.gap),
        wall_time=diag_b.wall_time + diag_f.wall_time,
        converged=diag_b.converged and diag_f.converged,
        raw_terms=raw,
    )


def _binary_objective(t0: np.ndarray, t1: np.ndarray, p_y, p_yf, p_yb, p_f) -> np.ndarray:
    """Vectorized I_Q(Y;B|F) on the two-parameter family of feasible binary joints."""
    g = np.broadcast(t0, t1)
    q = np.empty((g.size, 2, 2, 2))
    for y, t in ((0, np.broadcast_to(t0, g.shape).ravel()), (1, np.broadcast_to(t1, g.shape).ravel())):
        q[:, y, 0, 0] = t
        q[:, y, 0, 1] = p_yf[y, 0] - t
        q[:, y, 1, 0] = p_yb[y, 0] - t
        q[:, y, 1, 1] = p_y[y] - p_yf[y, 0] - p_yb[y, 0] + t
    q = np.maximum(q, 0.0)
    m = q.sum(axis=1)  # (G, f, b)
    num = q * p_f[None, None, :, None]
    den = p_yf[None, :, :, None] * m[:, None, :, :]
    mask = q > 1e-15
    ratio = np.ones_like(q)
    np.divide(num, np.maximum(den, _TINY), out=ratio, where=mask)
    vals = np.where(mask, q * np.log2(ratio), 0.0).sum(axis=(1, 2, 3))
    return vals.reshape(g.shape)


def brute_force_unique(joint: JointPMF3, grid_resolution: int = 10_000) -> float:
    """Grid-plus-zoom oracle for Uni(Y;B|F) on all-binary joints.

    The feasible set is a box in at most two scalars (one per y slice with
    slack); an initial uniform grid of about ``grid_resolution`` evaluations
    is refined by repeated local zooming, so the result is well inside
    O(1/grid_resolution) of the optimum of this convex objective.
    """
    if joint.dims != (2, 2, 2):
        raise ValueError("brute_force_unique supports binary alphabets only")
    if grid_resolution < 4:
        raise ValueError("grid_resolution must be at least 4")
    p = joint.mass
    p_y, p_yf, p_yb = _marginals(p)
    p_f = p_yf.sum(axis=0)

    lo = np.maximum(0.0, p_yf[:, 0] + p_yb[:, 0] - p_y)
    hi = np.minimum(p_yf[:, 0], p_yb[:, 0])
    free = hi - lo > 1e-14

    def evaluate(t0, t1):
        return _binary_objective(np.asarray(t0, float), np.asarray(t1, float), p_y, p_yf, p_yb, p_f)

    if not free.any():
        return float(evaluate(lo[0], lo[1]))

    if free.all():
        n = max(3, int(np.sqrt(grid_resolution)))
        ranges = [np.array([lo[0], hi[0]]), np.array([lo[1], hi[1]])]
        for _ in range(60):
            g0 = np.linspace(ranges[0][0], ranges[0][1], n)
            g1 = np.linspace(ranges[1][0], ranges[1][1], n)
            vals = evaluate(g0[:, None], g1[None, :])
            i, j = np.unravel_index(int(np.argmin(vals)), vals.shape)
            best = float(vals[i, j])
            step0 = (ranges[0][1] - ranges[0][0]) / (n - 1)
            step1 = (ranges[1][1] - ranges[1][0]) / (n - 1)
            if max(step0, step1) < 1e-16:
                break
            ranges[0] = np.clip([g0[i] - step0, g0[i] + step0], lo[0], hi[0])
            ranges[1] = np.clip([g1[j] - step1, g1[j] + step1], lo[1], hi[1])
        return best

    y_free = int(np.flatnonzero(free)[0])
    y_fixed = 1 - y_free
    t_fixed = lo[y_fixed]
    a, b = float(lo[y_free]), float(hi[y_free])
    n = max(5, int(grid_resolution))
    best = np.inf
    for _ in range(60):
        grid = np.linspace(a, b, n)
        t0 = grid if y_free == 0 else np.full_like(grid, t_fixed)
        t1 = grid if y_free == 1 else np.full_like(grid, t_fixed)
        vals = evaluate(t0, t1)
        k = int(np.argmin(vals))
        best = float(vals[k])
        step = (b - a) / (n - 1)
        if step < 1e-16:
            break
        a = max(lo[y_free], grid[k] - step)
        b = min(hi[y_free], grid[k] + step)
        n = 33
    return best

"""Blackwell sufficiency via garbling-matrix search.

P(F|Y) is sufficient for P(B|Y) exactly when a row-stochastic matrix T maps
the (Y,F) joint onto the (Y,B) joint: P_YB(y,b) = sum_f P_YF(y,f) T(f,b).
The search minimizes the l1 reconstruction residual subject to T being
row-stochastic, posed as a linear program, so near-feasible numerical cases
degrade gracefully instead of flipping a strict feasibility test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from spuriq.dist_core import Channel, JointPMF3, PairPMF, marginalize

__all__ = ["GarblingCertificate", "blackwell_sufficient", "find_garbling"]

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class GarblingCertificate:
    """Best row-stochastic garbling found and its l1 reconstruction residual."""

    channel: Channel
    residual: float


def find_garbling(
    p_yf: PairPMF, p_yb: PairPMF, tol: float = DEFAULT_TOL
) -> tuple[bool, GarblingCertificate]:
    """Search for T with P_YF composed with T reproducing P_YB.

    Returns (feasible, certificate); feasible is True when the optimal
    residual is at most ``tol``. The certificate always carries the best T
    found, with rows of zero-probability F symbols fixed to uniform.
    """
    if p_yf.dims[0] != p_yb.dims[0]:
        raise ValueError(
            f"Y alphabets differ: {p_yf.dims[0]} vs {p_yb.dims[0]}"
        )
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    ny, nf = p_yf.dims
    nb = p_yb.dims[1]
    a = p_yf.mass
    b = p_yb.mass

    # variables: T (nf*nb) then slack e (ny*nb); minimize sum(e) subject to
    # |sum_f a[y,f] T[f,b] - b[y,b]| <= e[y,b] and rows of T summing to 1
    n_t = nf * nb
    n_e = ny * nb
    c = np.concatenate([np.zeros(n_t), np.ones(n_e)])

    rows_ub = []
    rhs_ub = []
    for y in range(ny):
        for j in range(nb):
            coef = np.zeros(n_t + n_e)
            coef[j::nb][:nf] = a[y]
            coef[n_t + y * nb + j] = -1.0
            rows_ub.append(coef.copy())
            rhs_ub.append(b[y, j])
            coef[:n_t] = -coef[:n_t]
            rows_ub.append(coef)
            rhs_ub.append(-b[y, j])
    a_eq = np.zeros((nf, n_t + n_e))
    for f in range(nf):
        a_eq[f, f * nb : (f + 1) * nb] = 1.0
    bounds = [(0.0, 1.0)] * n_t + [(0.0, None)] * n_e

    res = linprog(
        c,
        A_ub=np.asarray(rows_ub),
        b_ub=np.asarray(rhs_ub),
        A_eq=a_eq,
        b_eq=np.ones(nf),
        bounds=bounds,
        method="highs",
    )
    if res.status != 0:  # pragma: no cover - the program is always feasible
        raise RuntimeError(f"garbling LP failed: {res.message}")

    t = np.clip(res.x[:n_t].reshape(nf, nb), 0.0, 1.0)
    p_f = a.sum(axis=0)
    t[p_f <= 1e-15] = 1.0 / nb  # unconstrained rows: fixed for determinism
    t /= t.sum(axis=1, keepdims=True)
    residual = float(np.abs(a @ t - b).sum())
    cert = GarblingCertificate(Channel(t), residual)
    return residual <= tol, cert


def blackwell_sufficient(
    joint: JointPMF3, tol: float = DEFAULT_TOL
) -> tuple[bool, GarblingCertificate]:
    """Is P(F|Y) Blackwell sufficient for P(B|Y) under this joint?"""
    return find_garbling(marginalize(joint, "yf"), marginalize(joint, "yb"), tol)

"""Exact discrete-probability primitives.

Dense joint distributions over (Y, F, B), pairwise marginals, row-stochastic
channels, and the classical information measures. All measures use base-2
logarithms (bits) with the 0*log(0) = 0 convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "AbsoluteContinuityError",
    "Alphabet",
    "Channel",
    "JointPMF3",
    "PairPMF",
    "compose_channels",
    "conditional_mutual_information",
    "entropy",
    "joint_mutual_information",
    "kl_divergence",
    "marginalize",
    "mutual_information",
]

# Total-mass drift below EXACT_TOL is accepted verbatim; drift in
# (EXACT_TOL, RENORM_TOL] is renormalized with a recorded flag; beyond
# RENORM_TOL construction fails.
EXACT_TOL = 1e-12
RENORM_TOL = 1e-9

# Cells below this are exact zeros for logarithm purposes, so rounding dust
# never produces NaNs.
ZERO_CELL = 1e-15

_AXIS_NAMES = ("y", "f", "b")


class AbsoluteContinuityError(ValueError):
    """KL divergence is undefined: p puts mass where q has none."""


def _axis_index(axis: int | str) -> int:
    if isinstance(axis, str):
        name = axis.lower()
        if name not in _AXIS_NAMES:
            raise ValueError(f"unknown axis {axis!r}; expected one of {_AXIS_NAMES}")
        return _AXIS_NAMES.index(name)
    if axis not in (0, 1, 2):
        raise ValueError(f"axis index must be 0, 1 or 2, got {axis}")
    return int(axis)


def _validated_mass(mass, ndim: int, what: str) -> tuple[np.ndarray, bool]:
    arr = np.asarray(mass, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{what} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{what} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite cells")
    if np.any(arr < 0):
        raise ValueError(f"{what} contains negative cells (min {arr.min():.3e})")
    total = float(arr.sum())
    drift = abs(total - 1.0)
    if drift <= EXACT_TOL:
        return arr.copy(), False
    if drift <= RENORM_TOL:
        return arr / total, True
    raise ValueError(f"{what} sums to {total!r}, off by more than {RENORM_TOL}")


def _xlog2x(a: np.ndarray) -> np.ndarray:
    safe = np.maximum(a, ZERO_CELL)
    return np.where(a > ZERO_CELL, a * np.log2(safe), 0.0)


@dataclass(frozen=True)
class Alphabet:
    """Finite symbol range for one axis, optionally with display names."""

    size: int
    names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError(f"alphabet size must be >= 1, got {self.size}")
        if self.names is not None:
            names = tuple(self.names)
            if len(names) != self.size:
                raise ValueError("names length does not match alphabet size")
            if len(set(names)) != len(names):
                raise ValueError("alphabet names must be distinct")
            object.__setattr__(self, "names", names)


@dataclass(frozen=True, eq=False)
class JointPMF3:
    """Joint probability mass over (Y, F, B), validated at construction.

    ``renormalized`` records whether the input mass needed the small-drift
    renormalization; an instance therefore never exists in an invalid state.
    """

    mass: np.ndarray
    renormalized: bool = False

    def __post_init__(self) -> None:
        arr, renorm = _validated_mass(self.mass, 3, "joint pmf")
        arr.setflags(write=False)
        object.__setattr__(self, "mass", arr)
        object.__setattr__(self, "renormalized", renorm)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.mass.shape  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class PairPMF:
    """Joint probability mass over a pair of variables."""

    mass: np.ndarray
    renormalized: bool = False

    def __post_init__(self) -> None:
        arr, renorm = _validated_mass(self.mass, 2, "pair pmf")
        arr.setflags(write=False)
        object.__setattr__(self, "mass", arr)
        object.__setattr__(self, "renormalized", renorm)

    @property
    def dims(self) -> tuple[int, int]:
        return self.mass.shape  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic conditional distribution: matrix[i, o] = P(out=o | in=i)."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.matrix, dtype=float)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"channel matrix must be 2-dimensional, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("channel matrix contains non-finite entries")
        if np.any(arr < 0) or np.any(arr > 1 + RENORM_TOL):
            raise ValueError("channel entries must lie in [0, 1]")
        rows = arr.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > RENORM_TOL):
            worst = float(np.abs(rows - 1.0).max())
            raise ValueError(f"channel rows must sum to 1 (worst drift {worst:.3e})")
        if np.any(np.abs(rows - 1.0) > EXACT_TOL):
            arr = arr / rows[:, None]
        else:
            arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    @property
    def n_in(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_out(self) -> int:
        return self.matrix.shape[1]


def marginalize(joint: JointPMF3, keep: str | Sequence[int | str]):
    """Sum out the axes not in ``keep``.

    ``keep`` is a nonempty strict subset of the axes, given as indices or as
    axis letters ("y", "f", "b"; a string like "yb" also works). Returns a
    PairPMF for two kept axes or a plain 1-D array for one.
    """
    if isinstance(keep, str):
        keep_list = list(keep)
    else:
        keep_list = list(keep)
    kept = sorted({_axis_index(a) for a in keep_list})
    if not kept or len(kept) >= 3:
        raise ValueError("keep must be a nonempty strict subset of the three axes")
    dropped = tuple(a for a in range(3) if a not in kept)
    out = joint.mass.sum(axis=dropped)
    if len(kept) == 1:
        return out
    return PairPMF(out)


def compose_channels(outer: Channel, inner: Channel) -> Channel:
    """Composition (outer after inner): result[c, a] = sum_b inner[c, b] * outer[b, a]."""
    if outer.n_in != inner.n_out:
        raise ValueError(
            f"cannot compose: outer expects {outer.n_in} inputs, inner emits {inner.n_out}"
        )
    return Channel(inner.matrix @ outer.matrix)


def entropy(p) -> float:
    """Shannon entropy in bits of a pmf given as an array of any shape."""
    arr = np.asarray(p, dtype=float)
    return float(-_xlog2x(arr).sum())


def mutual_information(pair: PairPMF) -> float:
    """I(X1; X2) in bits for a pair pmf."""
    p = pair.mass
    prod = np.outer(p.sum(axis=1), p.sum(axis=0))
    mask = p > ZERO_CELL
    ratio = np.ones_like(p)
    np.divide(p, np.maximum(prod, ZERO_CELL), out=ratio, where=mask)
    return float(np.where(mask, p * np.log2(ratio), 0.0).sum())


def joint_mutual_information(joint: JointPMF3) -> float:
    """I(Y; (F, B)) in bits, treating (F, B) as one composite variable."""
    ny = joint.dims[0]
    return mutual_information(PairPMF(joint.mass.reshape(ny, -1)))


def conditional_mutual_information(joint: JointPMF3, target: int | str, given: int | str) -> float:
    """I(target; other | given) in bits, where other is the remaining axis."""
    t = _axis_index(target)
    g = _axis_index(given)
    if t == g:
        raise ValueError("target and given must be distinct axes")
    o = next(a for a in range(3) if a not in (t, g))
    p = np.transpose(joint.mass, (t, o, g))
    p_g = p.sum(axis=(0, 1))
    p_tg = p.sum(axis=1)
    p_og = p.sum(axis=0)
    mask = p > ZERO_CELL
    num = p * p_g[None, None, :]
    den = p_tg[:, None, :] * p_og[None, :, :]
    ratio = np.ones_like(p)
    np.divide(num, np.maximum(den, ZERO_CELL**2), out=ratio, where=mask)
    return float(np.where(mask, p * np.log2(ratio), 0.0).sum())


def kl_divergence(p, q) -> float:
    """KL(p || q) in bits; raises AbsoluteContinuityError if unsupported mass exists."""
    pa = np.asarray(p, dtype=float)
    qa = np.asarray(q, dtype=float)
    if pa.shape != qa.shape:
        raise ValueError(f"pmf shapes differ: {pa.shape} vs {qa.shape}")
    for name, arr in (("p", pa), ("q", qa)):
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} is not a valid pmf")
    p_support = pa > ZERO_CELL
    if np.any(p_support & (qa <= ZERO_CELL)):
        raise AbsoluteContinuityError("p has mass outside the support of q")
    ratio = np.ones_like(pa)
    np.divide(pa, np.maximum(qa, ZERO_CELL), out=ratio, where=p_support)
    return float(np.where(p_support, pa * np.log2(ratio), 0.0).sum())

"""Polar decomposition of SL(2,R) cocycles and the large-coupling reduction.

The conjugated transfer matrix factors as a rotation times a diagonal
stretch.  In the large-coupling limit the stretch becomes
diag(lam*sqrt(csc_sq), 1/(lam*sqrt(csc_sq))) evaluated one step ahead of
the rotation, giving the reduced cocycle used by the angle recursion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import potential as pot
from .cocycle import (
    CocycleParams,
    Mat2,
    conjugated_entry_arrays,
    conjugated_matrix,
    product_log_norms,
)
from .phase import DyadicGrid


class RotationInputError(ValueError):
    """Polar decomposition rejected: the input is (numerically) a rotation."""


@dataclass(frozen=True)
class PolarParts:
    """B = U1 @ U2 @ Lambda @ U2.T with U1, U2 rotations, Lambda = diag(s, 1/s)."""

    U1: Mat2
    U2: Mat2
    Lambda: Mat2

    def reconstruct(self) -> Mat2:
        return self.U1 @ self.U2 @ self.Lambda @ self.U2.transpose()

    @property
    def norm(self) -> float:
        return self.Lambda.a11


def csc_sq(v: pot.PotentialSpec, x, t: float):
    """(t - v(x))^2 + 1, the squared cosecant of the base angle; >= 1."""
    r = t - pot.eval(v, x)
    return r * r + 1.0


def base_angle(v: pot.PotentialSpec, x, t: float):
    """The unique angle in (0, pi) whose cotangent is t - v(x)."""
    out = np.arctan2(1.0, t - pot.eval(v, x))
    return float(out) if np.isscalar(x) else out


def polar_decompose(B: Mat2) -> PolarParts:
    """Exact rotation-stretch-rotation factorization of an SL(2,R) matrix.

    Rejects inputs within 1e-9 of the rotation group, where the stretch
    directions are not determined.
    """
    if abs(B.det() - 1.0) > 1e-9:
        raise ValueError(f"expected det 1, got {B.det()!r}")
    arr = B.as_array()
    u, s, vt = np.linalg.svd(arr)
    if s[0] <= 1.0 + 1e-9:
        raise RotationInputError(
            "matrix norm is 1 within tolerance; decomposition is not unique"
        )
    vmat = vt.T
    if np.linalg.det(vmat) < 0:
        vmat = vmat.copy()
        vmat[:, 1] *= -1.0
        u = u.copy()
        u[:, 1] *= -1.0
    # Fix the residual (U, V) -> (-U, -V) ambiguity so diagonal inputs give
    # identity rotations.
    if vmat[0, 0] < 0 or (vmat[0, 0] == 0 and vmat[1, 0] < 0):
        vmat = -vmat
        u = -u
    u1 = Mat2.from_array(u @ vmat.T)
    u2 = Mat2.from_array(vmat)
    lam_mat = Mat2.diagonal(float(s[0]), float(s[1]))
    return PolarParts(U1=u1, U2=u2, Lambda=lam_mat)


def norm_coefficient(v: pot.PotentialSpec, x, t: float, lam: float):
    """Closed-form coefficient `a` with ||conjugated matrix|| = lam*sqrt(a/2).

    The radicand factors as (r^2 + (1-s)^2)(r^2 + (1+s)^2) with s = 1/lam^2,
    so it is nonnegative by construction.
    """
    r = t - pot.eval(v, x)
    if math.isinf(lam):
        return 2.0 * (r * r + 1.0)
    s = lam ** -2
    rad = (r * r + (1.0 - s) ** 2) * (r * r + (1.0 + s) ** 2)
    out = r * r + 1.0 + s * s + np.sqrt(np.maximum(rad, 0.0))
    return float(out) if np.isscalar(x) else out


def rotation_cos(v: pot.PotentialSpec, x, t: float, lam: float):
    """Upper-left entry (cosine) of the rotation factor of the conjugated cocycle.

    At lam = inf this is (t - v(x))/sqrt((t - v(x))^2 + 1), the cosine of the
    base angle.  Requires x and 2x to avoid the discontinuity of v.
    """
    xs = np.asarray(x, dtype=float)
    r = t - pot.eval(v, xs)
    if math.isinf(lam):
        out = r / np.sqrt(r * r + 1.0)
        return float(out) if np.isscalar(x) else out
    tx = np.mod(2.0 * xs, 1.0)
    r_tx = t - pot.eval(v, tx)
    a_x = norm_coefficient(v, xs, t, lam)
    a_tx = norm_coefficient(v, tx, t, lam)
    s = lam ** -2
    f_x = 1.0 / np.sqrt((a_x - 2.0 * s * s) ** 2 + 4.0 * s * s * r * r)
    f_tx = 1.0 / np.sqrt((a_tx - 2.0 * s * s) ** 2 + 4.0 * s * s * r_tx * r_tx)
    c4 = np.sqrt(2.0 / a_x) * f_tx * f_x * a_tx * a_x
    bracket = (
        r
        - 2.0 * r_tx / (lam**2 * a_tx)
        + 2.0 * r / (lam**4 * a_tx)
        - 4.0 * r_tx / (lam**6 * a_x * a_tx)
    )
    out = c4 * bracket
    return float(out) if np.isscalar(x) else out


@dataclass(frozen=True)
class ReducedCocycle:
    """The large-coupling model: A(x) = Lambda(2x) . R_(base angle at x)."""

    params: CocycleParams
    potential: pot.PotentialSpec

    def matrix_at(self, x: float) -> Mat2:
        return reduced_matrix(self, x)


def reduced_matrix(rc: ReducedCocycle, x: float) -> Mat2:
    """Lambda(2x) @ R_theta(x); unimodular by construction."""
    p, v = rc.params, rc.potential
    tx = (2.0 * x) % 1.0
    stretch = p.lam * math.sqrt(csc_sq(v, tx, p.t))
    theta = base_angle(v, x, p.t)
    return Mat2.diagonal(stretch, 1.0 / stretch) @ Mat2.rotation(theta)


def reduced_entry_arrays(p: CocycleParams, v: pot.PotentialSpec, x_now, x_next):
    """Entry arrays of Lambda(2x) @ R_theta(x) for vectorized products.

    x_next must hold the doubled phases (2 * x_now mod 1), supplied by the
    caller so exact dyadic iterates can be used.
    """
    theta = np.arctan2(1.0, p.t - pot.eval_with_limit(v, x_now))
    stretch = p.lam * np.sqrt(csc_sq(v, x_next, p.t))
    c, s = np.cos(theta), np.sin(theta)
    return stretch * c, -stretch * s, s / stretch, c / stretch


@dataclass(frozen=True)
class GapReport:
    """Finite-depth comparison of the conjugated cocycle and its reduction."""

    lam: float
    t: float
    n: int
    grid_level: int
    le_conjugated: float
    le_reduced: float

    @property
    def gap(self) -> float:
        return abs(self.le_conjugated - self.le_reduced)

    @property
    def gap_times_lam_sq(self) -> float:
        return self.gap * self.lam**2

    def fits(self, C: float) -> bool:
        return self.gap <= C / self.lam**2

    def summary(self) -> str:
        return (
            f"lam={self.lam:g} t={self.t:g} n={self.n}: "
            f"conjugated {self.le_conjugated:.6f}, reduced {self.le_reduced:.6f}, "
            f"gap {self.gap:.3e} (gap*lam^2 = {self.gap_times_lam_sq:.3g})"
        )


def le_gap_check(
    v: pot.PotentialSpec, t: float, lam: float, n: int, grid: DyadicGrid
) -> GapReport:
    """Phase-averaged finite-n growth of the true vs the reduced cocycle.

    Report-style: the gap and its lam^2-scaled size are returned, nothing is
    asserted, since no quantitative closeness rate is claimed.
    """
    if lam < 2:
        raise ValueError("gap check is meaningful for lam >= 2")
    p = CocycleParams(lam, t)
    iterates = [grid.iterated_points(k) for k in range(n + 1)]

    def conj_step(k):
        return conjugated_entry_arrays(p, v, iterates[k])

    def red_step(k):
        return reduced_entry_arrays(p, v, iterates[k], iterates[k + 1])

    le_conj = float(np.mean(product_log_norms(conj_step, n, grid.size))) / n
    le_red = float(np.mean(product_log_norms(red_step, n, grid.size))) / n
    return GapReport(
        lam=lam,
        t=t,
        n=n,
        grid_level=grid.level,
        le_conjugated=le_conj,
        le_reduced=le_red,
    )

"""SL(2,R) primitives, the transfer-matrix cocycle and stable iteration.

Transfer products grow like lambda^n, which overflows 64-bit floats near
n ~ 700/log10(lambda).  Vectors are therefore iterated in (direction,
log-magnitude) form and matrix products are renormalized periodically, with
the accumulated log factor carried separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import potential as pot
from .phase import DyadicPhase, double, to_real

RENORM_EVERY = 16


@dataclass(frozen=True)
class Mat2:
    """Plain 2x2 real matrix."""

    a11: float
    a12: float
    a21: float
    a22: float

    @classmethod
    def identity(cls) -> "Mat2":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def rotation(cls, gamma: float) -> "Mat2":
        c, s = math.cos(gamma), math.sin(gamma)
        return cls(c, -s, s, c)

    @classmethod
    def diagonal(cls, d1: float, d2: float) -> "Mat2":
        return cls(d1, 0.0, 0.0, d2)

    @classmethod
    def from_array(cls, arr) -> "Mat2":
        a = np.asarray(arr, dtype=float)
        return cls(float(a[0, 0]), float(a[0, 1]), float(a[1, 0]), float(a[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    def transpose(self) -> "Mat2":
        return Mat2(self.a11, self.a21, self.a12, self.a22)

    def __matmul__(self, other: "Mat2") -> "Mat2":
        return Mat2(
            self.a11 * other.a11 + self.a12 * other.a21,
            self.a11 * other.a12 + self.a12 * other.a22,
            self.a21 * other.a11 + self.a22 * other.a21,
            self.a21 * other.a12 + self.a22 * other.a22,
        )

    def scale(self, factor: float) -> "Mat2":
        return Mat2(self.a11 * factor, self.a12 * factor, self.a21 * factor, self.a22 * factor)

    def frobenius(self) -> float:
        return math.sqrt(self.a11**2 + self.a12**2 + self.a21**2 + self.a22**2)

    def spectral_norm(self) -> float:
        """Largest singular value, in closed form."""
        q = self.a11**2 + self.a12**2 + self.a21**2 + self.a22**2
        d = abs(self.det())
        disc = max(q * q - 4.0 * d * d, 0.0)
        return math.sqrt(0.5 * (q + math.sqrt(disc)))


@dataclass(frozen=True)
class CocycleParams:
    """Coupling lambda > 0 and reduced energy t = E / lambda."""

    lam: float
    t: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("coupling lambda must be positive")

    @property
    def energy(self) -> float:
        return self.lam * self.t

    @classmethod
    def from_energy(cls, lam: float, energy: float) -> "CocycleParams":
        return cls(lam, energy / lam)


@dataclass(frozen=True)
class ScaledVec:
    """A nonzero vector as direction angle plus log magnitude."""

    angle: float
    log_norm: float

    @classmethod
    def e1(cls) -> "ScaledVec":
        return cls(0.0, 0.0)

    def as_array(self) -> np.ndarray:
        return math.exp(self.log_norm) * np.array([math.cos(self.angle), math.sin(self.angle)])


@dataclass(frozen=True)
class ScaledMat2:
    """mat times exp(log_scale); mat is kept at unit spectral norm."""

    mat: Mat2
    log_scale: float

    def log_spectral_norm(self) -> float:
        return self.log_scale + math.log(self.mat.spectral_norm())

    def as_array(self) -> np.ndarray:
        return math.exp(self.log_scale) * self.mat.as_array()


def _require_unimodular(m: Mat2) -> Mat2:
    if abs(m.det() - 1.0) > 1e-12:
        raise ValueError(f"cocycle matrix has det {m.det()!r}, expected 1")
    return m


def schrodinger_matrix(p: CocycleParams, v_at_x: float) -> Mat2:
    """[[E - lambda*v, -1], [1, 0]]."""
    return _require_unimodular(Mat2(p.energy - p.lam * v_at_x, -1.0, 1.0, 0.0))


def conjugated_matrix(p: CocycleParams, v_at_x: float) -> Mat2:
    """Diagonal conjugation that balances the norm to size lambda.

    P A P^-1 with P = diag(1/sqrt(lambda), sqrt(lambda)) gives
    [[lambda*(t - v), -1/lambda], [lambda, 0]].
    """
    return _require_unimodular(
        Mat2(p.lam * (p.t - v_at_x), -1.0 / p.lam, p.lam, 0.0)
    )


def apply(m: Mat2, w: ScaledVec) -> ScaledVec:
    """Image of w under m, keeping the magnitude in log form."""
    c, s = math.cos(w.angle), math.sin(w.angle)
    y1 = m.a11 * c + m.a12 * s
    y2 = m.a21 * c + m.a22 * s
    r = math.hypot(y1, y2)
    if r < 1e-300:
        raise ValueError("matrix sent a unit vector to (numerically) zero")
    return ScaledVec(math.atan2(y2, y1) % (2 * math.pi), w.log_norm + math.log(r))


def projective_distance(a: float, b: float) -> float:
    """Distance of two directions on the projective circle (mod pi)."""
    d = (a - b) % math.pi
    return min(d, math.pi - d)


_MATRIX_KINDS = {"schrodinger": schrodinger_matrix, "conjugated": conjugated_matrix}


def transfer_product(
    p: CocycleParams,
    v: pot.PotentialSpec,
    x: DyadicPhase,
    n: int,
    kind: str = "schrodinger",
):
    """Iterate the cocycle n steps from e1.

    Returns (image of e1 as a ScaledVec, renormalized product matrix).
    n = 0 gives e1 and the identity.
    """
    factory = _MATRIX_KINDS[kind]
    w = ScaledVec.e1()
    prod = Mat2.identity()
    log_scale = 0.0
    y = x
    for k in range(n):
        m = factory(p, pot.eval_with_limit(v, to_real(y)))
        w = apply(m, w)
        prod = m @ prod
        if (k + 1) % RENORM_EVERY == 0:
            norm = prod.spectral_norm()
            prod = prod.scale(1.0 / norm)
            log_scale += math.log(norm)
        y = double(y)
    norm = prod.spectral_norm()
    return w, ScaledMat2(prod.scale(1.0 / norm), log_scale + math.log(norm))


def product_log_norms(step_fn, n: int, shape) -> np.ndarray:
    """log of the spectral norm of n-step matrix products, batched.

    step_fn(k) must return entry arrays (b11, b12, b21, b22) broadcastable
    to `shape` for the k-th matrix of every product.  Products are
    accumulated by left multiplication and renormalized by their Frobenius
    norm every RENORM_EVERY steps so entries stay O(1) regardless of n.
    """
    a11 = np.ones(shape)
    a12 = np.zeros(shape)
    a21 = np.zeros(shape)
    a22 = np.ones(shape)
    logs = np.zeros(shape)
    for k in range(n):
        b11, b12, b21, b22 = step_fn(k)
        n11 = b11 * a11 + b12 * a21
        n12 = b11 * a12 + b12 * a22
        n21 = b21 * a11 + b22 * a21
        n22 = b21 * a12 + b22 * a22
        a11, a12, a21, a22 = n11, n12, n21, n22
        if (k + 1) % RENORM_EVERY == 0:
            f = np.sqrt(a11**2 + a12**2 + a21**2 + a22**2)
            inv = 1.0 / f
            a11 *= inv
            a12 *= inv
            a21 *= inv
            a22 *= inv
            logs += np.log(f)
    q = a11**2 + a12**2 + a21**2 + a22**2
    det = a11 * a22 - a12 * a21
    disc = np.maximum(q * q - 4.0 * det * det, 0.0)
    s1_sq = 0.5 * (q + np.sqrt(disc))
    return logs + 0.5 * np.log(s1_sq)


def direction_log_growth(step_fn, n: int, shape, angle0: float = 0.0):
    """Iterate unit directions through n matrices, batched.

    Returns (angles, log_norms) of the images of the initial direction,
    with magnitudes accumulated in log form (never materialized).
    """
    c = np.full(shape, math.cos(angle0))
    s = np.full(shape, math.sin(angle0))
    logs = np.zeros(shape)
    for k in range(n):
        b11, b12, b21, b22 = step_fn(k)
        y1 = b11 * c + b12 * s
        y2 = b21 * c + b22 * s
        r = np.hypot(y1, y2)
        logs += np.log(r)
        inv = 1.0 / r
        c = y1 * inv
        s = y2 * inv
    return np.arctan2(s, c), logs


def schrodinger_entry_arrays(p: CocycleParams, v: pot.PotentialSpec, x_now):
    """Vectorized entries of the transfer matrix at each phase in x_now."""
    vals = pot.eval_with_limit(v, x_now)
    shape = np.shape(vals)
    return (
        p.energy - p.lam * vals,
        np.full(shape, -1.0),
        np.ones(shape),
        np.zeros(shape),
    )


def conjugated_entry_arrays(p: CocycleParams, v: pot.PotentialSpec, x_now):
    """Vectorized entries of the diagonally conjugated transfer matrix."""
    vals = pot.eval_with_limit(v, x_now)
    shape = np.shape(vals)
    return (
        p.lam * (p.t - vals),
        np.full(shape, -1.0 / p.lam),
        np.full(shape, p.lam),
        np.zeros(shape),
    )


def check_recurrence(
    p: CocycleParams,
    v: pot.PotentialSpec,
    x: DyadicPhase,
    n: int,
    u0: float,
    u_minus1: float,
    rel_tol: float = 1e-8,
) -> bool:
    """Does the scalar recurrence reproduce the matrix-product image?

    The recurrence u_{k+1} = (E - lambda*v(T^k x))*u_k - u_{k-1} must agree
    componentwise with A_n(x) (u0, u_minus1)^T, scaled by the max magnitude.
    """
    u_prev, u_cur = u_minus1, u0
    y = x
    for _ in range(n):
        val = pot.eval_with_limit(v, to_real(y))
        u_next = (p.energy - p.lam * val) * u_cur - u_prev
        u_prev, u_cur = u_cur, u_next
        y = double(y)
    _, smat = transfer_product(p, v, x, n)
    vec = smat.as_array() @ np.array([u0, u_minus1])
    scale = max(abs(u_cur), abs(u_prev), abs(vec[0]), abs(vec[1]), 1e-300)
    return bool(
        abs(vec[0] - u_cur) <= rel_tol * scale and abs(vec[1] - u_prev) <= rel_tol * scale
    )

"""Built-in potential families with evaluators and hypothesis validation.

Three families are shipped:

* ``affine``: v(x) = x.
* ``smooth-monotone``: v(x) = x + a*sin(2*pi*x)/(2*pi), one parameter a.
  For |a| <= 1/2 this keeps v' >= 1/2 with v(0+) = 0, v(1-) = 1.
* ``trig-polynomial``: v(x) = sum_k a_k cos(2*pi*k*x) + b_k sin(2*pi*k*x),
  exempt from the monotonicity requirements.

The monotone families are normalized so that the right limit at 0 is 0 and
the left limit at 1 is 1; the jump at 0 on the circle is intentional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

KINDS = ("affine", "smooth-monotone", "trig-polynomial")


class PotentialDomainError(ValueError):
    """Evaluation at a point where the potential is not defined."""


@dataclass(frozen=True)
class PotentialSpec:
    """A potential family member with declared derivative/size bounds.

    c_v is the declared lower bound on v' over (0,1) (ignored for the
    trig-polynomial kind); C_v bounds both |v| and |v'|.
    """

    kind: str
    params: tuple[float, ...]
    c_v: float
    C_v: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")

    @property
    def monotone(self) -> bool:
        return self.kind != "trig-polynomial"


def affine() -> PotentialSpec:
    return PotentialSpec("affine", (), c_v=1.0, C_v=1.0)


def smooth_monotone(a: float) -> PotentialSpec:
    """v(x) = x + a*sin(2*pi*x)/(2*pi).  Monotone hypotheses need |a| <= 1/2.

    Out-of-range `a` is accepted so that validate() can demonstrate the
    violation reports; the declared bounds are then simply wrong.
    """
    return PotentialSpec(
        "smooth-monotone", (float(a),), c_v=max(1.0 - abs(a), 0.0), C_v=1.0 + abs(a)
    )


def trig_polynomial(cos_coeffs, sin_coeffs=()) -> PotentialSpec:
    """v(x) = sum a_k cos(2 pi k x) + b_k sin(2 pi k x), k starting at 1."""
    a = tuple(float(c) for c in cos_coeffs)
    b = tuple(float(c) for c in sin_coeffs)
    k_a = np.arange(1, len(a) + 1)
    k_b = np.arange(1, len(b) + 1)
    sup_v = float(np.sum(np.abs(a)) + np.sum(np.abs(b)))
    sup_dv = float(2 * math.pi * (np.sum(k_a * np.abs(a)) + np.sum(k_b * np.abs(b))))
    params = (float(len(a)),) + a + b
    return PotentialSpec("trig-polynomial", params, c_v=0.0, C_v=max(sup_v, sup_dv, 1e-12))


def _trig_parts(spec: PotentialSpec):
    n_cos = int(spec.params[0])
    a = np.asarray(spec.params[1 : 1 + n_cos])
    b = np.asarray(spec.params[1 + n_cos :])
    return a, b


def _check_monotone_domain(x):
    if np.any(x == 0.0):
        raise PotentialDomainError(
            "monotone potentials are discontinuous at x = 0; use the right limit 0"
        )


def eval(spec: PotentialSpec, x):
    """v(x).  Scalar or array; monotone kinds require x in (0,1) mod 1."""
    xs = np.asarray(x, dtype=float)
    if spec.monotone:
        xs = np.mod(xs, 1.0)
        _check_monotone_domain(xs)
    out = _eval_raw(spec, xs)
    return float(out) if np.isscalar(x) else out


def eval_deriv(spec: PotentialSpec, x):
    """v'(x) with the same domain conventions as eval."""
    xs = np.asarray(x, dtype=float)
    if spec.monotone:
        xs = np.mod(xs, 1.0)
        _check_monotone_domain(xs)
    out = _deriv_raw(spec, xs)
    return float(out) if np.isscalar(x) else out


def eval_with_limit(spec: PotentialSpec, x):
    """Like eval but uses the right limit at x = 0 for monotone kinds.

    Both monotone families evaluate to exactly 0 at 0 through their raw
    formulas, which is the right limit, so no special casing is needed.
    """
    xs = np.mod(np.asarray(x, dtype=float), 1.0)
    out = _eval_raw(spec, xs)
    return float(out) if np.isscalar(x) else out


def eval_deriv_with_limit(spec: PotentialSpec, x):
    """v' with the right-limit convention at x = 0."""
    xs = np.mod(np.asarray(x, dtype=float), 1.0)
    out = _deriv_raw(spec, xs)
    return float(out) if np.isscalar(x) else out


def _eval_raw(spec: PotentialSpec, xs: np.ndarray) -> np.ndarray:
    if spec.kind == "affine":
        return xs
    if spec.kind == "smooth-monotone":
        a = spec.params[0]
        return xs + a * np.sin(2 * math.pi * xs) / (2 * math.pi)
    a, b = _trig_parts(spec)
    two_pi_x = 2 * math.pi * xs
    out = np.zeros_like(xs)
    for k, coeff in enumerate(a, start=1):
        out = out + coeff * np.cos(k * two_pi_x)
    for k, coeff in enumerate(b, start=1):
        out = out + coeff * np.sin(k * two_pi_x)
    return out


def _deriv_raw(spec: PotentialSpec, xs: np.ndarray) -> np.ndarray:
    if spec.kind == "affine":
        return np.ones_like(xs)
    if spec.kind == "smooth-monotone":
        a = spec.params[0]
        return 1.0 + a * np.cos(2 * math.pi * xs)
    a, b = _trig_parts(spec)
    two_pi_x = 2 * math.pi * xs
    out = np.zeros_like(xs)
    for k, coeff in enumerate(a, start=1):
        out = out - coeff * 2 * math.pi * k * np.sin(k * two_pi_x)
    for k, coeff in enumerate(b, start=1):
        out = out + coeff * 2 * math.pi * k * np.cos(k * two_pi_x)
    return out


def spec_id(spec: PotentialSpec) -> str:
    if not spec.params:
        return spec.kind
    return spec.kind + "[" + ",".join(f"{p:g}" for p in spec.params) + "]"


# ---------------------------------------------------------------------------
# serialization


def to_json(spec: PotentialSpec) -> dict:
    return {
        "kind": spec.kind,
        "params": list(spec.params),
        "c_v": spec.c_v,
        "C_v": spec.C_v,
    }


def from_json(obj: dict) -> PotentialSpec:
    return PotentialSpec(
        kind=obj["kind"],
        params=tuple(float(p) for p in obj["params"]),
        c_v=float(obj["c_v"]),
        C_v=float(obj["C_v"]),
    )


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    check: str
    x: float
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    spec: PotentialSpec
    passed: bool
    skipped: tuple[str, ...]
    violations: tuple[Violation, ...]
    inf_deriv: float

    def summary(self) -> str:
        status = "pass" if self.passed else "FAIL"
        lines = [f"potential {spec_id(self.spec)}: {status}, inf v' = {self.inf_deriv:.6g}"]
        lines += [f"  skipped: {name}" for name in self.skipped]
        lines += [f"  violated {v.check} at x={v.x:.8g}: {v.detail}" for v in self.violations]
        return "\n".join(lines)


def validate(spec: PotentialSpec, samples: int = 4096) -> ValidationReport:
    """Check the declared hypotheses on a fine grid; report, never raise.

    Monotone kinds: v(0+) ~ 0 and v(1-) ~ 1 within 1e-9, v' >= c_v,
    |v| and |v'| <= C_v, and the analytic derivative must match central
    finite differences.  The trig-polynomial kind skips the monotonicity
    and endpoint checks.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    violations: list[Violation] = []
    skipped: list[str] = []
    xs = (np.arange(samples) + 0.5) / samples
    v = eval(spec, xs)
    dv = eval_deriv(spec, xs)

    if spec.monotone:
        eps = 1e-12
        v0 = eval(spec, eps)
        v1 = eval(spec, 1.0 - eps)
        if abs(v0) > 1e-9:
            violations.append(Violation("v(0+)=0", eps, f"v(0+) = {v0:.3e}"))
        if abs(v1 - 1.0) > 1e-9:
            violations.append(Violation("v(1-)=1", 1.0 - eps, f"v(1-) = {v1:.6g}"))
        bad = dv < spec.c_v
        if np.any(bad):
            i = int(np.argmin(dv))
            violations.append(
                Violation("v' >= c_v", float(xs[i]), f"v'({xs[i]:.6g}) = {dv[i]:.6g} < c_v = {spec.c_v}")
            )
    else:
        skipped.append("monotonicity checks (trig-polynomial kind)")

    for name, vals in (("|v| <= C_v", v), ("|v'| <= C_v", dv)):
        over = np.abs(vals) > spec.C_v
        if np.any(over):
            i = int(np.argmax(np.abs(vals)))
            violations.append(Violation(name, float(xs[i]), f"|{vals[i]:.6g}| > C_v = {spec.C_v}"))

    h = 2.0 ** -20
    interior = (xs > 2 * h) & (xs < 1 - 2 * h)
    xi = xs[interior]
    fd = (eval(spec, xi + h) - eval(spec, xi - h)) / (2 * h)
    rel = np.abs(fd - dv[interior]) / (1.0 + np.abs(dv[interior]))
    if np.any(rel > 1e-6):
        i = int(np.argmax(rel))
        violations.append(
            Violation("v' matches finite differences", float(xi[i]), f"relative error {rel[i]:.3e}")
        )

    return ValidationReport(
        spec=spec,
        passed=not violations,
        skipped=tuple(skipped),
        violations=tuple(violations),
        inf_deriv=float(np.min(dv)),
    )


def count_level_set(spec: PotentialSpec, t: float, tol: float = 1e-12) -> int:
    """Number of solutions of v(x) = t in (0,1) for monotone kinds (0 or 1)."""
    if not spec.monotone:
        raise ValueError("level-set counting is defined for monotone kinds only")
    eps = 1e-12
    lo, hi = eval(spec, eps), eval(spec, 1 - eps)
    if not (lo < t < hi):
        return 0
    a, b = eps, 1 - eps
    while b - a > tol:
        m = 0.5 * (a + b)
        if eval(spec, m) < t:
            a = m
        else:
            b = m
    return 1

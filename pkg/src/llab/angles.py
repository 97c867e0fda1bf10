"""The lifted angle recursion, its derivatives and the lemma verifiers.

Level n angles live on the circle only modulo pi, but all counting and
measure arguments need the continuous lift on each dyadic continuity
interval.  The lift propagates exactly through the recursion: the branch
offset of the new angle is pi * floor(previous lift / pi), because the
half-turn map commutes with lifting.  Lifts at grid points are therefore
exact, with no neighbor-based unwrapping and no grid-resolution ambiguity;
the grid only limits quadrature accuracy and root isolation, and those
paths refine themselves pointwise where the angle field is steep.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import potential as pot
from .phase import DyadicGrid

PI = math.pi
LOG2 = math.log(2.0)


class ResolutionError(RuntimeError):
    """A grid-based computation could not resolve the angle field."""


class MiscountError(ResolutionError):
    """Multiple roots share one grid cell; refine the grid to isolate them."""


@dataclass(frozen=True)
class AngleField:
    """Per-grid-point lifted angles at one recursion level.

    theta holds the exact lift, phi the raw branch value in [0, pi] (zeros
    at level 0), dtheta the analytic derivative of the lift, segment_id the
    index j of the continuity interval [j/2^n, (j+1)/2^n).
    """

    n: int
    grid: DyadicGrid
    theta: np.ndarray
    phi: np.ndarray
    dtheta: np.ndarray
    segment_id: np.ndarray
    potential: pot.PotentialSpec | None
    t: float
    lam: float | None

    def max_cell_step(self) -> float:
        """Largest within-segment increment of the lift between neighbors."""
        d = np.abs(np.diff(self.theta))
        same = np.diff(self.segment_id) == 0
        return float(np.max(d[same])) if np.any(same) else 0.0

    def to_csv(self, path) -> None:
        xs = self.grid.points()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "n", "theta", "phi", "dtheta", "segment_id"])
            for i in range(xs.size):
                w.writerow(
                    [
                        repr(float(xs[i])),
                        self.n,
                        repr(float(self.theta[i])),
                        repr(float(self.phi[i])),
                        repr(float(self.dtheta[i])),
                        int(self.segment_id[i]),
                    ]
                )


def _step_arrays(v, t, lam, lift, dth, y, two_n):
    """One level of the angle recursion, vectorized.

    Returns (new lift, raw branch phi, new derivative).  The branch value
    is computed by a two-argument arctangent of (sin, lam^2 * csc_sq * cos),
    never by forming a cotangent, so angles near multiples of pi are safe.
    """
    ry = t - pot._eval_raw(v, y)
    vpy = pot._deriv_raw(v, y)
    big_g = ry * ry + 1.0
    m = np.floor(lift / PI)
    frac_part = lift - m * PI
    s0 = np.sin(frac_part)
    c0 = np.cos(frac_part)
    lam_sq = lam * lam
    phi = np.arctan2(s0, lam_sq * big_g * c0)
    d_big = s0 * s0 + lam_sq * lam_sq * big_g * big_g * c0 * c0
    new_dth = (
        2.0 * lam_sq * c0 * s0 * ry * vpy * two_n + lam_sq * big_g * dth
    ) / d_big + two_n * vpy / big_g
    new_lift = m * PI + phi + np.arctan2(1.0, ry)
    return new_lift, phi, new_dth


def build_theta0(
    v: pot.PotentialSpec, t: float, grid: DyadicGrid, lam: float | None = None
) -> AngleField:
    """Level-0 field: the base angle and its derivative v'/csc_sq."""
    xs = grid.points()
    r = t - pot.eval(v, xs)
    theta = np.arctan2(1.0, r)
    dtheta = pot.eval_deriv(v, xs) / (r * r + 1.0)
    return AngleField(
        n=0,
        grid=grid,
        theta=theta,
        phi=np.zeros_like(theta),
        dtheta=dtheta,
        segment_id=np.zeros(xs.size, dtype=np.int64),
        potential=v,
        t=t,
        lam=lam,
    )


def advance(field: AngleField, v: pot.PotentialSpec, t: float, lam: float) -> AngleField:
    """Field at level n from the field at level n-1."""
    n = field.n + 1
    if field.grid.level < n + 1:
        raise ValueError(f"grid level {field.grid.level} too coarse for level {n}")
    y = field.grid.iterated_points(n)
    lift, phi, dth = _step_arrays(v, t, lam, field.theta, field.dtheta, y, 2.0**n)
    seg = np.floor(field.grid.points() * (1 << n)).astype(np.int64)
    return AngleField(
        n=n,
        grid=field.grid,
        theta=lift,
        phi=phi,
        dtheta=dth,
        segment_id=seg,
        potential=v,
        t=t,
        lam=lam,
    )


def build_fields(
    v: pot.PotentialSpec,
    t: float,
    lam: float,
    n_max: int,
    grid: DyadicGrid | None = None,
) -> list[AngleField]:
    """The chain of fields for levels 0..n_max on one common grid.

    Default grid level is n_max + 6.
    """
    if grid is None:
        grid = DyadicGrid(n_max + 6)
    fields = [build_theta0(v, t, grid, lam=lam)]
    for _ in range(n_max):
        fields.append(advance(fields[-1], v, t, lam))
    return fields


def theta_pointwise(v, t, lam, xs, n):
    """Exact lift and derivative of the level-n angle at arbitrary points.

    Identical arithmetic to the grid construction, so it agrees bitwise with
    field values at grid points.  The doubling orbit is computed in floats,
    which is exact (times-two and fractional part are lossless), so the
    result is the recursion evaluated at precisely the given float values.
    """
    xs = np.asarray(xs, dtype=float)
    r = t - pot._eval_raw(v, xs)
    lift = np.arctan2(1.0, r)
    dth = pot._deriv_raw(v, xs) / (r * r + 1.0)
    y = xs
    for k in range(1, n + 1):
        y = (2.0 * y) % 1.0
        lift, _, dth = _step_arrays(v, t, lam if lam is not None else 1.0, lift, dth, y, 2.0**k)
    return lift, dth


def discontinuity_set(n: int) -> np.ndarray:
    """The dyadics j/2^n, j = 0..2^n-1, containing every jump of level n."""
    if n < 0:
        raise ValueError("level must be >= 0")
    return np.arange(1 << n, dtype=np.int64) / float(1 << n)


# ---------------------------------------------------------------------------
# segment scaffolding shared by root finding and measure computation


def _segment_scaffold(field: AngleField):
    """Per segment: abscissae and exact lifts including one-sided edges.

    Yields (xs_seq, th_seq) where the sequences start at the segment's left
    endpoint (the angle is right-continuous there) and end just below the
    right endpoint.
    """
    v, t, lam, n = field.potential, field.t, field.lam, field.n
    if v is None:
        raise ValueError("field has no potential attached; cannot refine pointwise")
    grid_x = field.grid.points()
    n_seg = 1 << n
    starts = np.arange(n_seg) / float(n_seg)
    ends = np.nextafter(np.arange(1, n_seg + 1) / float(n_seg), -np.inf)
    th_start, _ = theta_pointwise(v, t, lam, starts, n)
    th_end, _ = theta_pointwise(v, t, lam, ends, n)
    per_seg = field.grid.size // n_seg
    for j in range(n_seg):
        sl = slice(j * per_seg, (j + 1) * per_seg)
        xs_seq = np.concatenate(([starts[j]], grid_x[sl], [ends[j]]))
        th_seq = np.concatenate(([th_start[j]], field.theta[sl], [th_end[j]]))
        yield j, xs_seq, th_seq


def _bisect_to_targets(field: AngleField, lo, hi, targets, iters=60):
    """Solve lift(x) = target within brackets, vectorized over brackets.

    Brackets come from the segment scaffold, so the lift is increasing
    across each of them; the exact pointwise lift makes the comparison
    unambiguous at any steepness.
    """
    v, t, lam, n = field.potential, field.t, field.lam, field.n
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    targets = np.asarray(targets, dtype=float)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        th_mid, _ = theta_pointwise(v, t, lam, mid, n)
        below = th_mid < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def critical_count(field: AngleField) -> int:
    """Exact cardinality of {x : theta_n(x) in pi*Z + pi/2}.

    Uses only the one-sided lifts at the segment endpoints: within each
    continuity interval the lift is monotone, so the count is the number of
    half-integer levels inside the traversed range, independent of grid
    resolution.
    """
    v, t, lam, n = field.potential, field.t, field.lam, field.n
    n_seg = 1 << n
    starts = np.arange(n_seg) / float(n_seg)
    ends = np.nextafter(np.arange(1, n_seg + 1) / float(n_seg), -np.inf)
    th_s, _ = theta_pointwise(v, t, lam, starts, n)
    th_e, _ = theta_pointwise(v, t, lam, ends, n)
    counts = np.ceil((th_e - PI / 2) / PI) - np.ceil((th_s - PI / 2) / PI)
    return int(np.sum(np.maximum(counts, 0)))


def critical_points(field: AngleField, tol: float = 1e-10) -> np.ndarray:
    """Sorted roots of cos(theta_n), isolated by grid cells and bisected.

    Raises MiscountError when two or more roots share one grid cell: the
    scan cannot tell them apart, so the caller must refine the grid.
    """
    brackets_lo, brackets_hi, br_targets = [], [], []
    for _, xs_seq, th_seq in _segment_scaffold(field):
        th_mono = np.maximum.accumulate(th_seq)
        lo_lev = np.floor((th_mono[:-1] - PI / 2) / PI)
        hi_lev = np.floor((th_mono[1:] - PI / 2) / PI)
        counts = (hi_lev - lo_lev).astype(np.int64)
        if np.any(counts >= 2):
            i = int(np.argmax(counts))
            raise MiscountError(
                f"{int(counts[i])} roots inside one cell near x = {xs_seq[i]:.8g} "
                f"(level {field.n}); refine the grid"
            )
        hit = np.nonzero(counts == 1)[0]
        for i in hit:
            brackets_lo.append(xs_seq[i])
            brackets_hi.append(xs_seq[i + 1])
            br_targets.append((lo_lev[i] + 1) * PI + PI / 2)
    if not brackets_lo:
        return np.array([])
    roots = _bisect_to_targets(field, brackets_lo, brackets_hi, br_targets, iters=70)
    th_r, _ = theta_pointwise(field.potential, field.t, field.lam, roots, field.n)
    residual = np.abs(np.cos(th_r))
    if np.any(residual > tol):
        worst = float(np.max(residual))
        raise ResolutionError(f"root refinement stalled at |cos theta| = {worst:.2e}")
    return np.sort(roots)


def bad_set_measure(field: AngleField, delta: float) -> float:
    """Lebesgue measure of the points whose angle is delta-close to pi/2.

    Closeness is projective: distance of theta - pi/2 to the nearest
    multiple of pi.  The grid-count baseline is sharpened by bisection: each
    component boundary is the preimage of (level +- delta) under the
    monotone lift, located exactly within its bracketing cell.
    """
    if not 0.0 < delta < PI / 2:
        raise ValueError("delta must lie in (0, pi/2)")
    jobs_lo, jobs_hi, jobs_target = [], [], []
    comp = []  # (segment, level, side) -> job index or clamped x
    for j, xs_seq, th_seq in _segment_scaffold(field):
        th_mono = np.maximum.accumulate(th_seq)
        th_s, th_e = th_mono[0], th_mono[-1]
        m_lo = int(np.ceil((th_s - delta - PI / 2) / PI))
        m_hi = int(np.floor((th_e + delta - PI / 2) / PI))
        for m in range(m_lo, m_hi + 1):
            level = PI / 2 + m * PI
            ends = {}
            for side, target in (("l", level - delta), ("r", level + delta)):
                if target <= th_s:
                    ends[side] = ("x", xs_seq[0])
                elif target >= th_e:
                    ends[side] = ("x", xs_seq[-1])
                else:
                    i = int(np.searchsorted(th_mono, target, side="left"))
                    jobs_lo.append(xs_seq[i - 1])
                    jobs_hi.append(xs_seq[i])
                    jobs_target.append(target)
                    ends[side] = ("job", len(jobs_lo) - 1)
            comp.append(ends)
    solved = (
        _bisect_to_targets(field, jobs_lo, jobs_hi, jobs_target)
        if jobs_lo
        else np.array([])
    )

    def resolve(end):
        kind, val = end
        return val if kind == "x" else float(solved[val])

    total = 0.0
    for ends in comp:
        left = resolve(ends["l"])
        right = resolve(ends["r"])
        if right > left:
            total += right - left
    return total


# ---------------------------------------------------------------------------
# the singular log|cos| integral


_G_TABLE = None


def _log_sinc_cumulative():
    """Cumulative integral of log(sin s / s) on [0, pi/2], tabulated once."""
    global _G_TABLE
    if _G_TABLE is None:
        m = 1 << 16
        s = np.linspace(0.0, PI / 2, m + 1)
        vals = np.empty_like(s)
        vals[0] = 0.0
        vals[1:] = np.log(np.sin(s[1:]) / s[1:])
        cum = np.concatenate(([0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(s))))
        _G_TABLE = (s, cum)
    return _G_TABLE


def _log_sin_antideriv(u):
    """F(u) = integral of log|sin s| ds from 0 to u, for any real u."""
    s_tab, g_tab = _log_sinc_cumulative()
    a = np.abs(u)
    q = np.floor(a / PI)
    rem = a - q * PI
    rem_half = np.minimum(rem, PI - rem)
    rem_half = np.maximum(rem_half, 0.0)
    core = np.where(
        rem_half > 0.0,
        rem_half * np.log(np.maximum(rem_half, 1e-300)) - rem_half,
        0.0,
    ) + np.interp(rem_half, s_tab, g_tab)
    f_rem = np.where(rem <= PI / 2, core, -PI * LOG2 - core)
    return np.sign(u) * (q * (-PI * LOG2) + f_rem)


def log_cos_integral(field: AngleField, span_cap: float = 0.4, max_rounds: int = 12) -> float:
    """Integral of log|cos theta_n| over the circle; finite and <= 0.

    Per grid cell the lift is modeled linearly around the center using the
    analytic derivative, and log|sin| is integrated in closed form through
    its singularities, which is the continuum limit of summing dyadic
    shells around each root with exact per-shell log averages.  Cells whose
    modeled angle span exceeds span_cap are split 8-fold (recursively, up
    to max_rounds) with fresh pointwise evaluations, so staircase-like
    steep fields at large couplings are integrated accurately too.
    """
    xs = field.grid.points()
    theta = field.theta
    dth = field.dtheta
    halves = np.full_like(theta, 0.5 * field.grid.spacing)
    total = 0.0
    can_refine = field.potential is not None
    for round_no in range(max_rounds + 1):
        span = np.abs(dth) * 2.0 * halves
        if can_refine and round_no < max_rounds:
            steep = span > span_cap
        else:
            steep = np.zeros_like(span, dtype=bool)
        flat = ~steep
        u_c = theta[flat] - PI / 2
        spread = dth[flat] * halves[flat]
        safe = np.abs(dth[flat]) > 1e-12
        upper = _log_sin_antideriv(u_c + spread)
        lower = _log_sin_antideriv(u_c - spread)
        with np.errstate(divide="ignore", invalid="ignore"):
            linear = (upper - lower) / dth[flat]
        fallback = 2.0 * halves[flat] * np.log(np.maximum(np.abs(np.cos(theta[flat])), 1e-300))
        total += float(np.sum(np.where(safe, linear, fallback)))
        if not np.any(steep):
            break
        # split each steep cell into 8 subcells and re-evaluate pointwise
        xc = xs[steep]
        hc = halves[steep]
        offs = (2.0 * np.arange(8) + 1.0) / 8.0
        sub_x = (xc[:, None] - hc[:, None] + offs[None, :] * 2.0 * hc[:, None]).ravel()
        sub_h = np.repeat(hc / 8.0, 8)
        th_new, dth_new = theta_pointwise(field.potential, field.t, field.lam, sub_x, field.n)
        xs, theta, dth, halves = sub_x, th_new, dth_new, sub_h
    return min(total, 0.0)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class DerivativeReport:
    """Scaled derivative minima per level and the fitted uniform constant."""

    levels: tuple[int, ...]
    scaled_minima: tuple[float, ...]
    c_fit: float
    c_target: float

    @property
    def passed(self) -> bool:
        return self.c_fit >= self.c_target

    def summary(self) -> str:
        rows = ", ".join(
            f"n={n}: {m:.4g}" for n, m in zip(self.levels, self.scaled_minima)
        )
        verdict = "pass" if self.passed else "FAIL"
        return f"min dtheta/2^n per level [{rows}]; c_fit={self.c_fit:.4g} vs target {self.c_target:g}: {verdict}"


def derivative_bound_check(fields: list[AngleField], c_target: float) -> DerivativeReport:
    """Report the largest c with dtheta_n > c * 2^n across the given fields."""
    levels = tuple(f.n for f in fields)
    minima = tuple(float(np.min(f.dtheta)) / 2.0**f.n for f in fields)
    return DerivativeReport(
        levels=levels,
        scaled_minima=minima,
        c_fit=min(minima),
        c_target=c_target,
    )


def fd_relative_errors(field: AngleField, converge_tol: float = 3e-5):
    """Centered finite differences of the lift vs the analytic derivative.

    The grid cannot resolve the angle field everywhere (at large couplings
    the lift climbs in steep staircases), so finite differences are trusted
    only where they validate themselves: the step-h and step-2h centered
    differences must agree to converge_tol relative (Richardson error
    estimate) and the derivative must be grid-smooth across the stencil
    (two step sizes can coincide by accident on an unresolved riser), with
    the full 5-point stencil inside one segment.  Returns (relative errors
    on the participating cells, participating fraction).
    """
    th = field.theta
    seg = field.segment_id
    h = field.grid.spacing
    fd_h = (th[3:-1] - th[1:-3]) / (2.0 * h)
    fd_2h = (th[4:] - th[:-4]) / (4.0 * h)
    same = seg[4:] == seg[:-4]
    converged = np.abs(fd_h - fd_2h) <= 3.0 * converge_tol * np.abs(fd_h)
    dth = field.dtheta
    smooth = (np.abs(dth[4:] - dth[:-4]) <= 0.05 * np.abs(dth[2:-2])) & (
        np.abs(dth[3:-1] - dth[1:-3]) <= 0.05 * np.abs(dth[2:-2])
    )
    mask = same & converged & smooth
    analytic = dth[2:-2][mask]
    rel = np.abs(fd_h[mask] - analytic) / np.abs(analytic)
    return rel, float(np.mean(mask))


def direction_oracle_gap(
    v: pot.PotentialSpec,
    t: float,
    lam: float,
    n_max: int,
    grid: DyadicGrid | None = None,
    n_probe: int = 1024,
) -> float:
    """Worst projective distance between recursion angles and matrix directions.

    The matrix side rotates the iterated image of e1 by the base angle at
    the current orbit point; its direction mod pi must match the recursion's
    angle at every level up to n_max.  This ties the angle machinery to the
    cocycle products directly.
    """
    if grid is None:
        grid = DyadicGrid(n_max + 6)
    fields = build_fields(v, t, lam, n_max, grid)
    stride = max(grid.size // n_probe, 1)
    idx = np.arange(0, grid.size, stride)
    wc = np.ones(idx.size)
    ws = np.zeros(idx.size)
    worst = 0.0
    for k in range(n_max + 1):
        y = grid.iterated_points(k)[idx]
        th0 = np.arctan2(1.0, t - pot.eval_with_limit(v, y))
        c0, s0 = np.cos(th0), np.sin(th0)
        uc = c0 * wc - s0 * ws
        us = s0 * wc + c0 * ws
        direction = np.arctan2(us, uc)
        d = np.abs(direction - fields[k].theta[idx]) % PI
        gap = float(np.max(np.minimum(d, PI - d)))
        worst = max(worst, gap)
        if k < n_max:
            y_next = grid.iterated_points(k + 1)[idx]
            stretch = lam * np.sqrt((t - pot.eval_with_limit(v, y_next)) ** 2 + 1.0)
            wc_new = stretch * uc
            ws_new = us / stretch
            norm = np.hypot(wc_new, ws_new)
            wc, ws = wc_new / norm, ws_new / norm
    return worst

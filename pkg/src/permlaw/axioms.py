"""Numerical checks for code axioms, permutability, and comonotonicity.

Every check evaluates the code on a finite grid and reports a residual in a
symmetric relative scale:

    |lhs - rhs| / max(1, |lhs|, |rhs|)

so exact symmetry gives residual zero regardless of which side is larger,
and values below 1 are compared absolutely.  A check passes when its worst
residual is at or below the tolerance (defaults: 1e-9 for closed-form codes,
1e-4 for interpolated ones).

Composed checks such as permutability need inner values G(y, r) to land back
in the first-variable domain.  Triples whose inner value escapes are skipped
and counted; if more than 90% of a grid is skipped the check refuses to
report a verdict and raises DomainTooSmall instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .lawcore import (
    INCREASING,
    BivariateCode,
    Interval,
    InvalidParams,
    LawError,
    MonotoneFunction,
    RangeExceeded,
    invert_in_first,
)

__all__ = [
    "DomainTooSmall",
    "NotComonotonic",
    "CheckReport",
    "SolvabilityReport",
    "ComonotonicReport",
    "ComonotonicPair",
    "ImplicationReport",
    "relative_residuals",
    "check_code_axioms",
    "check_solvability",
    "check_permutability",
    "check_quasi_permutability",
    "check_comonotonic",
    "construct_F",
    "check_M_permutable_implies_G",
]

SKIP_LIMIT = 0.9


class DomainTooSmall(LawError):
    """Too few composed grid points stayed inside the domain to judge."""


class NotComonotonic(LawError):
    """The (M, G) pair does not order the domain the same way."""


def relative_residuals(lhs, rhs):
    """Symmetric relative difference, floored at scale 1."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
    return np.abs(lhs - rhs) / scale


def _grid2(grid) -> tuple[int, int]:
    if isinstance(grid, int):
        return grid, grid
    g = tuple(int(v) for v in grid)
    if len(g) == 1:
        return g[0], g[0]
    if len(g) == 2:
        return g
    raise InvalidParams(f"expected 1 or 2 grid sizes, got {grid!r}")


def _grid3(grid) -> tuple[int, int, int]:
    if isinstance(grid, int):
        return grid, grid, grid
    g = tuple(int(v) for v in grid)
    if len(g) == 1:
        return g[0], g[0], g[0]
    if len(g) == 2:
        return g[0], g[1], g[1]
    if len(g) == 3:
        return g
    raise InvalidParams(f"expected 1 to 3 grid sizes, got {grid!r}")


def _axis_grid(interval: Interval, n: int, spacing: str):
    if spacing == "linear":
        return interval.grid(n)
    if spacing == "log":
        if interval.lo <= 0:
            raise InvalidParams("log spacing needs a positive interval")
        inset = 1e-9 * interval.width
        return np.geomspace(interval.lo + inset, interval.hi - inset, n)
    raise InvalidParams(f"unknown spacing {spacing!r}")


def _tol(code: BivariateCode, tolerance) -> float:
    if tolerance is not None:
        return float(tolerance)
    return code.default_tolerance()


def _pair_tol(code_M: BivariateCode, code_G: BivariateCode, tolerance) -> float:
    if tolerance is not None:
        return float(tolerance)
    return max(code_M.default_tolerance(), code_G.default_tolerance())


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one grid check.  passed is max_residual <= tolerance."""

    check: str
    grid: tuple[int, ...]
    max_residual: float
    mean_residual: float
    worst_point: tuple[float, ...] | None
    skipped_fraction: float
    tolerance: float
    passed: bool

    @classmethod
    def from_values(cls, check, grid, max_residual, mean_residual,
                    worst_point, skipped_fraction, tolerance) -> "CheckReport":
        return cls(
            check=str(check),
            grid=tuple(int(g) for g in grid),
            max_residual=float(max_residual),
            mean_residual=float(mean_residual),
            worst_point=None if worst_point is None
            else tuple(float(v) for v in worst_point),
            skipped_fraction=float(skipped_fraction),
            tolerance=float(tolerance),
            passed=bool(float(max_residual) <= float(tolerance)),
        )

    def to_json_dict(self) -> dict:
        return {
            "check": self.check,
            "grid": list(self.grid),
            "max_residual": self.max_residual,
            "mean_residual": self.mean_residual,
            "worst_point": None if self.worst_point is None else list(self.worst_point),
            "skipped_fraction": self.skipped_fraction,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def check_code_axioms(code: BivariateCode, grid=33, tolerance=None) -> CheckReport:
    """Monotonicity in both variables plus a continuity proxy.

    Monotonicity: wrong-direction steps along grid rows and columns,
    measured in the symmetric relative scale.  A step of zero (a flat spot
    at the working resolution) is not counted as a reversal.

    Continuity proxy: the largest adjacent jump must shrink by a factor of
    at least 1.5 when the grid step is halved.  A jump that refuses to
    shrink indicates a discontinuity; the shortfall below 1.5 becomes the
    residual.
    """
    ny, nr = _grid2(grid)
    tol = _tol(code, tolerance)
    ygrid = code.J.grid(ny)
    rgrid = code.J2.grid(nr)
    V = np.asarray(code(ygrid[:, None], rgrid[None, :]), dtype=float)
    scale = max(1.0, float(np.abs(V).max()))

    sign2 = 1.0 if code.dir_second == INCREASING else -1.0
    d1 = np.diff(V, axis=0)
    d2 = sign2 * np.diff(V, axis=1)
    viol1 = np.maximum(0.0, -d1) / scale
    viol2 = np.maximum(0.0, -d2) / scale
    mon_res = max(float(viol1.max(initial=0.0)), float(viol2.max(initial=0.0)))
    if viol1.max(initial=0.0) >= viol2.max(initial=0.0) and viol1.size:
        i, j = np.unravel_index(int(np.argmax(viol1)), viol1.shape)
        mon_point = (float(ygrid[i]), float(rgrid[j]))
    elif viol2.size:
        i, j = np.unravel_index(int(np.argmax(viol2)), viol2.shape)
        mon_point = (float(ygrid[i]), float(rgrid[j]))
    else:
        mon_point = (float(ygrid[0]), float(rgrid[0]))

    yf = code.J.grid(2 * ny - 1)
    rf = code.J2.grid(2 * nr - 1)
    Vf = np.asarray(code(yf[:, None], rf[None, :]), dtype=float)
    cont_res = 0.0
    cont_point = mon_point
    for axis in (0, 1):
        jump_c = float(np.abs(np.diff(V, axis=axis)).max(initial=0.0))
        dfine = np.abs(np.diff(Vf, axis=axis))
        jump_f = float(dfine.max(initial=0.0))
        if jump_f == 0.0:
            continue
        ratio = jump_c / jump_f
        res = max(0.0, (1.5 - ratio) / 1.5)
        if res > cont_res:
            cont_res = res
            i, j = np.unravel_index(int(np.argmax(dfine)), dfine.shape)
            cont_point = (float(yf[i]), float(rf[j]))

    if mon_res >= cont_res:
        worst, worst_point = mon_res, mon_point
    else:
        worst, worst_point = cont_res, cont_point
    mean = float(np.mean(np.concatenate([viol1.ravel(), viol2.ravel()])))
    return CheckReport.from_values(
        "axioms", (ny, nr), worst, mean, worst_point, 0.0, tol)


@dataclass(frozen=True)
class SolvabilityReport:
    """Coverage of solving in the first variable, plus anchor candidates.

    s1_fraction: over a grid of modifiers t and targets p drawn from the
    interior of the attainable range of code(., t), the fraction where the
    first-variable inversion succeeds.  For a continuous strictly monotone
    code this is 1.0; a code with a jump leaves its gap unreachable and the
    fraction drops.

    x0_ranges: for each anchor candidate x0, the interval of values
    reachable as code(x0, t) with t sweeping the second domain.  best_x0 is
    the candidate whose reachable interval covers the most of the
    first-variable domain, which is what anchor-based constructions care
    about.
    """

    s1_fraction: float
    x0_ranges: tuple[tuple[float, float, float], ...]
    best_x0: float
    best_x0_range: tuple[float, float]
    grid: tuple[int, int]
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "check": "solvability",
            "s1_fraction": self.s1_fraction,
            "x0_ranges": [list(row) for row in self.x0_ranges],
            "best_x0": self.best_x0,
            "best_x0_range": list(self.best_x0_range),
            "grid": list(self.grid),
            "pass": self.passed,
        }


def check_solvability(code: BivariateCode, grid=21,
                      x0_candidates=None) -> SolvabilityReport:
    nt, n_targets = _grid2(grid)
    J, J2 = code.J, code.J2
    tgrid = J2.grid(nt)

    s1_hits = s1_total = 0
    for t in tgrid:
        ends = sorted((float(code(J.lo, t)), float(code(J.hi, t))))
        w = ends[1] - ends[0]
        targets = np.linspace(ends[0] + 0.01 * w, ends[1] - 0.01 * w, n_targets)
        for p in targets:
            s1_total += 1
            try:
                invert_in_first(code, float(p), float(t))
                s1_hits += 1
            except RangeExceeded:
                pass

    if x0_candidates is None:
        x0_candidates = J.grid(nt)
    ranges = []
    for x0 in np.asarray(x0_candidates, dtype=float):
        ends = sorted((float(code(x0, J2.lo)), float(code(x0, J2.hi))))
        ranges.append((float(x0), ends[0], ends[1]))

    def usable_width(row):
        _, lo, hi = row
        return min(hi, J.hi) - max(lo, J.lo)

    best = max(ranges, key=usable_width)
    s1 = s1_hits / max(1, s1_total)
    return SolvabilityReport(
        s1_fraction=float(s1),
        x0_ranges=tuple(ranges),
        best_x0=float(best[0]),
        best_x0_range=(best[1], best[2]),
        grid=(nt, n_targets),
        passed=bool(s1 == 1.0),
    )


def check_permutability(code: BivariateCode, grid=20, tolerance=None) -> CheckReport:
    """Residuals of G(G(y, r), t) = G(G(y, t), r) over a y x r x t grid.

    Triples where an inner value G(y, r) or G(y, t) leaves the first-variable
    domain are skipped and counted in skipped_fraction.  Raises DomainTooSmall
    if more than 90% of the grid is skipped.
    """
    ny, nr, nt = _grid3(grid)
    tol = _tol(code, tolerance)
    J, J2 = code.J, code.J2
    y = J.grid(ny)
    r = J2.grid(nr)
    t = J2.grid(nt)
    slack = 1e-9 * max(1.0, J.width)

    inner_r = np.asarray(code(y[:, None], r[None, :]), dtype=float)  # (ny, nr)
    inner_t = np.asarray(code(y[:, None], t[None, :]), dtype=float)  # (ny, nt)
    ok = (J.contains(inner_r, slack)[:, :, None]
          & J.contains(inner_t, slack)[:, None, :])
    skipped = 1.0 - float(np.mean(ok))
    if skipped > SKIP_LIMIT or not np.any(ok):
        raise DomainTooSmall(
            f"permutability grid {ny}x{nr}x{nt}: {skipped:.1%} of triples "
            f"compose out of the domain; enlarge the domain or shrink the grid")

    safe_r = np.clip(inner_r, J.lo, J.hi)
    safe_t = np.clip(inner_t, J.lo, J.hi)
    lhs = np.asarray(code(safe_r[:, :, None], t[None, None, :]), dtype=float)
    rhs = np.asarray(code(safe_t[:, None, :], r[None, :, None]), dtype=float)
    res = relative_residuals(lhs, rhs)
    res_masked = np.where(ok, res, -1.0)

    flat = int(np.argmax(res_masked))
    i, j, k = np.unravel_index(flat, res_masked.shape)
    worst_point = (float(y[i]), float(r[j]), float(t[k]))
    return CheckReport.from_values(
        "permutability", (ny, nr, nt),
        float(res_masked[i, j, k]), float(res[ok].mean()),
        worst_point, skipped, tol)


def check_quasi_permutability(code_M: BivariateCode, code_G: BivariateCode,
                              grid=20, tolerance=None) -> CheckReport:
    """Residuals of M(G(x, s), t) = M(G(x, t), s).

    The x grid runs over the shared first-variable domain and s, t over the
    shared second-variable domain; inner values must land in M's
    first-variable domain or the triple is skipped.
    """
    nx, ns, nt = _grid3(grid)
    tol = _pair_tol(code_M, code_G, tolerance)
    J = code_G.J.intersect(code_M.J)
    J2 = code_G.J2.intersect(code_M.J2)
    JM = code_M.J
    x = J.grid(nx)
    s = J2.grid(ns)
    t = J2.grid(nt)
    slack = 1e-9 * max(1.0, JM.width)

    inner_s = np.asarray(code_G(x[:, None], s[None, :]), dtype=float)
    inner_t = np.asarray(code_G(x[:, None], t[None, :]), dtype=float)
    ok = (JM.contains(inner_s, slack)[:, :, None]
          & JM.contains(inner_t, slack)[:, None, :])
    skipped = 1.0 - float(np.mean(ok))
    if skipped > SKIP_LIMIT or not np.any(ok):
        raise DomainTooSmall(
            f"quasi-permutability grid {nx}x{ns}x{nt}: {skipped:.1%} of "
            f"triples compose out of the outer domain")

    safe_s = np.clip(inner_s, JM.lo, JM.hi)
    safe_t = np.clip(inner_t, JM.lo, JM.hi)
    lhs = np.asarray(code_M(safe_s[:, :, None], t[None, None, :]), dtype=float)
    rhs = np.asarray(code_M(safe_t[:, None, :], s[None, :, None]), dtype=float)
    res = relative_residuals(lhs, rhs)
    res_masked = np.where(ok, res, -1.0)

    flat = int(np.argmax(res_masked))
    i, j, k = np.unravel_index(flat, res_masked.shape)
    worst_point = (float(x[i]), float(s[j]), float(t[k]))
    return CheckReport.from_values(
        "quasi-permutability", (nx, ns, nt),
        float(res_masked[i, j, k]), float(res[ok].mean()),
        worst_point, skipped, tol)


@dataclass(frozen=True)
class ComonotonicReport:
    """Sampled order agreement between two codes on their shared domain."""

    passed: bool
    n_pairs: int
    n_checked: int
    n_violations: int
    tie_fraction: float
    witness: Mapping[str, float] | None

    def to_json_dict(self) -> dict:
        return {
            "check": "comonotonic",
            "n_pairs": self.n_pairs,
            "n_checked": self.n_checked,
            "n_violations": self.n_violations,
            "tie_fraction": self.tie_fraction,
            "witness": None if self.witness is None else dict(self.witness),
            "pass": self.passed,
        }


def check_comonotonic(code_M: BivariateCode, code_G: BivariateCode,
                      n_pairs=2000, seed=0, tie_band=None) -> ComonotonicReport:
    """Sample argument pairs and compare the order M and G put on them.

    Pairs whose M difference or G difference falls inside the tie band are
    skipped: at working precision their order is not determined.  Any
    surviving pair ordered one way by M and the other way by G is a
    violation, and the first one found is reported as a witness.
    """
    band = _pair_tol(code_M, code_G, tie_band)
    J = code_G.J.intersect(code_M.J)
    J2 = code_G.J2.intersect(code_M.J2)
    rng = np.random.default_rng(seed)
    x = rng.uniform(J.lo, J.hi, n_pairs)
    s = rng.uniform(J2.lo, J2.hi, n_pairs)
    y = rng.uniform(J.lo, J.hi, n_pairs)
    t = rng.uniform(J2.lo, J2.hi, n_pairs)

    m1 = np.asarray(code_M(x, s), dtype=float)
    m2 = np.asarray(code_M(y, t), dtype=float)
    g1 = np.asarray(code_G(x, s), dtype=float)
    g2 = np.asarray(code_G(y, t), dtype=float)
    dm = m1 - m2
    dg = g1 - g2
    band_m = band * max(1.0, float(np.abs(m1).max()), float(np.abs(m2).max()))
    band_g = band * max(1.0, float(np.abs(g1).max()), float(np.abs(g2).max()))
    tie = (np.abs(dm) <= band_m) | (np.abs(dg) <= band_g)
    checked = ~tie
    viol = checked & (np.sign(dm) != np.sign(dg))

    witness = None
    if np.any(viol):
        i = int(np.argmax(viol))
        witness = {
            "x": float(x[i]), "s": float(s[i]),
            "y": float(y[i]), "t": float(t[i]),
            "m_diff": float(dm[i]), "g_diff": float(dg[i]),
        }
    return ComonotonicReport(
        passed=bool(not np.any(viol)),
        n_pairs=int(n_pairs),
        n_checked=int(np.count_nonzero(checked)),
        n_violations=int(np.count_nonzero(viol)),
        tie_fraction=float(np.mean(tie)),
        witness=witness,
    )


@dataclass(frozen=True)
class ComonotonicPair:
    """A verified pair with the connecting map F, so F(M(x, s)) = G(x, s)."""

    M: BivariateCode
    G: BivariateCode
    F: MonotoneFunction
    n_samples: int
    n_knots: int
    max_order_violation: float

    def to_json_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "n_knots": self.n_knots,
            "max_order_violation": self.max_order_violation,
            "f_domain": [self.F.domain.lo, self.F.domain.hi],
        }


def construct_F(code_M: BivariateCode, code_G: BivariateCode,
                grid=64, spacing="linear", tolerance=None) -> ComonotonicPair:
    """Tabulate the increasing map F with F(M(x, s)) = G(x, s).

    Both codes are sampled on a shared grid and the (M, G) value pairs are
    sorted by M.  Ties in M (within 1e-12 of the value scale) are merged and
    their G values must agree within tolerance, and the merged G sequence
    must be nondecreasing within tolerance; otherwise the pair is not
    comonotonic and NotComonotonic is raised.  Sub-tolerance dips are
    flattened so the result is a valid increasing interpolant.
    """
    nx, ns = _grid2(grid)
    tol = _pair_tol(code_M, code_G, tolerance)
    J = code_G.J.intersect(code_M.J)
    J2 = code_G.J2.intersect(code_M.J2)
    xgrid = _axis_grid(J, nx, spacing)
    sgrid = _axis_grid(J2, ns, spacing)

    Mv = np.asarray(code_M(xgrid[:, None], sgrid[None, :]), dtype=float).ravel()
    Gv = np.asarray(code_G(xgrid[:, None], sgrid[None, :]), dtype=float).ravel()
    order = np.argsort(Mv, kind="stable")
    ms = Mv[order]
    gs = Gv[order]

    eps_m = 1e-12 * max(1.0, float(np.abs(ms).max()))
    starts = np.flatnonzero(np.concatenate(([True], np.diff(ms) > eps_m)))
    counts = np.diff(np.concatenate((starts, [ms.size])))
    m_rep = np.add.reduceat(ms, starts) / counts
    g_rep = np.add.reduceat(gs, starts) / counts

    g_scale = max(1.0, float(np.abs(gs).max()))
    if np.any(counts > 1):
        g_max = np.maximum.reduceat(gs, starts)
        g_min = np.minimum.reduceat(gs, starts)
        spread = (g_max - g_min) / g_scale
        worst = int(np.argmax(spread))
        if spread[worst] > tol:
            raise NotComonotonic(
                f"equal M value {float(m_rep[worst])!r} maps to G values "
                f"spread by {spread[worst]:.3e} (tolerance {tol:.1e})")

    dips = np.maximum(0.0, -np.diff(g_rep)) / g_scale
    max_dip = float(dips.max(initial=0.0))
    if max_dip > tol:
        i = int(np.argmax(dips))
        raise NotComonotonic(
            f"G decreases by {max_dip:.3e} while M increases near "
            f"M={float(m_rep[i])!r} (tolerance {tol:.1e})")

    g_fixed = np.maximum.accumulate(g_rep)
    keep = np.concatenate(([True], np.diff(g_fixed) > 0))
    F = MonotoneFunction(m_rep[keep], g_fixed[keep], INCREASING)
    return ComonotonicPair(
        M=code_M,
        G=code_G,
        F=F,
        n_samples=int(Mv.size),
        n_knots=int(np.count_nonzero(keep)),
        max_order_violation=max_dip,
    )


@dataclass(frozen=True)
class ImplicationReport:
    """Joint verdict: M G-permutable forces G itself to be permutable."""

    quasi: CheckReport
    perm: CheckReport
    implication_holds: bool

    def to_json_dict(self) -> dict:
        return {
            "check": "m-permutable-implies-g",
            "quasi": self.quasi.to_json_dict(),
            "perm": self.perm.to_json_dict(),
            "implication_holds": self.implication_holds,
        }


def check_M_permutable_implies_G(code_M: BivariateCode, code_G: BivariateCode,
                                 grid=20, tolerance=None) -> ImplicationReport:
    """Check the one-way dependence between the two permutability notions.

    If M is permutable with respect to G at the tolerance, G must come out
    permutable as well; the converse is not required.  G's own check runs at
    ten times the tolerance because the connecting map F can stretch
    residuals when carrying them from M values to G values.
    """
    tol = _pair_tol(code_M, code_G, tolerance)
    quasi = check_quasi_permutability(code_M, code_G, grid, tol)
    perm = check_permutability(code_G, grid, 10.0 * tol)
    holds = (not quasi.passed) or perm.passed
    return ImplicationReport(quasi=quasi, perm=perm, implication_holds=bool(holds))

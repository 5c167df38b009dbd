"""Fitting an additive representation directly, and affine alignment.

The constructive route builds f knot by knot; this module goes the other
way and treats the knot values of f, g (and m, when it is not tied to
f^-1) as free parameters, minimizing the mean squared relative residual of
m(f(y) + g(r)) against the code on a grid.  Monotonicity is built into the
parameterization, value differences pass through exp, so every iterate is
a valid representation and no projection step is needed.

Descent is deterministic: full finite-difference gradients, a
Barzilai-Borwein initial step, and Armijo backtracking, so the recorded
loss curve never increases.  The randomness budget of the seed is spent
exclusively on subsampling oversized grids.

affine_align and check_gauge_uniqueness cover the uniqueness side: any two
additive representations of the same code can only differ by f -> xi*f +
theta, g -> xi*g with xi > 0, so representations from different anchors,
or from the two construction routes, must align affinely to within the
numerical budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .holder import construct_f, construct_g, make_structure
from .lawcore import (
    DECREASING,
    INCREASING,
    AdditiveRepresentation,
    AffineMap,
    BivariateCode,
    Gauge,
    Interval,
    InvalidInterval,
    InvalidParams,
    LawError,
    MonotoneFunction,
)

__all__ = [
    "NonConvergence",
    "DegenerateFit",
    "MonotoneParam",
    "FitResult",
    "PairAlignment",
    "GaugeReport",
    "fit_additive",
    "affine_align",
    "check_gauge_uniqueness",
]

# exp argument clamps: knot-value differences stay strictly positive and
# large enough to survive strictness validation (exp(-16) ~ 1e-7), without
# overflowing upward.
_RAW_LO = -16.0
_RAW_HI = 30.0


class NonConvergence(LawError):
    """The fit stopped above the requested loss target.

    The partial result (representation, loss curve) is attached as
    .result so callers can inspect how far the descent got.
    """

    def __init__(self, msg: str, result: "FitResult"):
        super().__init__(msg)
        self.result = result


class DegenerateFit(LawError):
    """Alignment target is constant on the samples; no slope is defined."""


@dataclass(frozen=True)
class MonotoneParam:
    """Strictly monotone knot values from unconstrained reals.

    Realized values are base + direction * cumsum(exp(raw)), so every
    parameter vector maps to a strictly monotone sequence and the map is
    onto: any strictly monotone values can be encoded by log differences.
    """

    knot_xs: np.ndarray
    base: float
    raw: np.ndarray
    direction: float  # +1.0 or -1.0

    @classmethod
    def from_values(cls, knot_xs, values) -> "MonotoneParam":
        knot_xs = np.asarray(knot_xs, dtype=float)
        values = np.asarray(values, dtype=float)
        diffs = np.diff(values)
        direction = 1.0 if diffs[0] > 0 else -1.0
        mags = direction * diffs
        if np.any(mags <= 0):
            raise InvalidParams("knot values are not strictly monotone")
        return cls(knot_xs=knot_xs, base=float(values[0]),
                   raw=np.log(mags), direction=direction)

    @property
    def n_params(self) -> int:
        return 1 + self.raw.size

    def pack(self) -> np.ndarray:
        return np.concatenate(([self.base], self.raw))

    def with_packed(self, vec: np.ndarray) -> "MonotoneParam":
        return MonotoneParam(knot_xs=self.knot_xs, base=float(vec[0]),
                             raw=np.asarray(vec[1:], dtype=float),
                             direction=self.direction)

    def values(self) -> np.ndarray:
        steps = np.exp(np.clip(self.raw, _RAW_LO, _RAW_HI))
        out = np.empty(self.raw.size + 1)
        out[0] = self.base
        out[1:] = self.base + self.direction * np.cumsum(steps)
        return out

    def to_function(self) -> MonotoneFunction:
        direction = INCREASING if self.direction > 0 else DECREASING
        return MonotoneFunction(self.knot_xs, self.values(), direction)


@dataclass(frozen=True)
class FitResult:
    representation: AdditiveRepresentation
    loss: float
    loss_curve: tuple[float, ...]
    n_iters: int
    converged: bool

    def to_json_dict(self) -> dict:
        return {
            "check": "fit",
            "loss": self.loss,
            "n_iters": self.n_iters,
            "converged": self.converged,
        }


def _knot_grid(knots, interval) -> np.ndarray:
    if np.isscalar(knots):
        n = int(knots)
        if n < 2:
            raise InvalidParams("need at least 2 knots")
        return np.linspace(interval.lo, interval.hi, n)
    arr = np.asarray(knots, dtype=float)
    if arr.size < 2 or np.any(np.diff(arr) <= 0):
        raise InvalidParams("explicit knots must be sorted and distinct")
    return arr


def _constructive_init(code: BivariateCode):
    hs = make_structure(code)
    f = construct_f(hs, depth=12)
    g = construct_g(hs, f)
    return _transport_extend(code, f, g)


def _transport_extend(code: BivariateCode, f: MonotoneFunction,
                      g: MonotoneFunction):
    """Extend a constructed (f, g) pair over the code's whole value range.

    The construction tabulates f only on the orbit's reach inside J, which
    caps g at the modifiers whose slice value stays there.  But additivity
    pins f at every reachable value: f(G(y, r)) = f(y) + g(r), so each pass
    turns the covered box into new f knots beyond J and then re-transports
    g through the slice, until g covers J' (or nothing grows).  Used for
    fit initialization; the construction route itself keeps its
    trimmed-coverage contract.
    """
    J, J2 = code.J, code.J2
    slack2 = 1e-9 * max(1.0, J2.width)
    for _ in range(8):
        if g.domain.lo <= J2.lo + slack2 and g.domain.hi >= J2.hi - slack2:
            break
        y_cov = f.domain.intersect(J)
        ygrid = y_cov.grid(48)
        rgrid = g.domain.grid(48)
        V = np.asarray(code(ygrid[:, None], rgrid[None, :]), dtype=float).ravel()
        S = (np.asarray(f(ygrid), dtype=float)[:, None]
             + np.asarray(g(rgrid), dtype=float)[None, :]).ravel()
        xs = np.concatenate([np.asarray(f.xs), V])
        ys = np.concatenate([np.asarray(f.ys), S])
        order = np.argsort(xs)
        xs, ys = xs[order], ys[order]
        keep = [0]
        eps_x = 1e-12 * max(1.0, float(xs[-1] - xs[0]))
        eps_y = 1e-12 * max(1.0, float(np.abs(ys).max()))
        for i in range(1, xs.size):
            if xs[i] - xs[keep[-1]] > eps_x and ys[i] - ys[keep[-1]] > eps_y:
                keep.append(i)
        idx = np.asarray(keep, dtype=int)
        if idx.size <= f.xs.size:
            break
        f_ext = MonotoneFunction(xs[idx], ys[idx], INCREASING)
        x0 = y_cov.midpoint
        sgrid = J2.grid(257)
        psi = np.asarray(code(x0, sgrid), dtype=float)
        dom = f_ext.domain
        inside = (psi >= dom.lo) & (psi <= dom.hi)
        if inside.sum() < 2:
            break
        shift = float(f_ext(np.clip(x0, dom.lo, dom.hi)))
        g_vals = np.asarray(f_ext(psi[inside]), dtype=float) - shift
        old_anchor = g
        grew = (sgrid[inside][0] < g.domain.lo - slack2
                or sgrid[inside][-1] > g.domain.hi + slack2)
        g_dir = INCREASING if g_vals[-1] > g_vals[0] else DECREASING
        try:
            g_new = MonotoneFunction(sgrid[inside], g_vals, g_dir)
        except LawError:
            break
        # Keep the original gauge: match g on the old coverage midpoint.
        mid = old_anchor.domain.midpoint
        g_new = g_new.shifted(float(old_anchor(mid)) - float(g_new(mid)))
        f, g = f_ext, g_new
        if not grew:
            break
    return f, g


def _pl_eval(x, xs, ys):
    """Piecewise-linear evaluation with linear end extension.

    The extension keeps the model strictly monotone outside the knot span,
    so no parameter ever sits on a flat plateau where the gradient would
    vanish; np.interp alone clamps to the end values.
    """
    y = np.interp(x, xs, ys)
    lo_s = (ys[1] - ys[0]) / (xs[1] - xs[0])
    hi_s = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
    y = np.where(x < xs[0], ys[0] + (x - xs[0]) * lo_s, y)
    y = np.where(x > xs[-1], ys[-1] + (x - xs[-1]) * hi_s, y)
    return y


def _extrap_sample(fn: MonotoneFunction, xs: np.ndarray) -> np.ndarray:
    # Sample a tabulated function at arbitrary points, extending linearly
    # past its covered interval; used only to seed initial knot values.
    return np.asarray(_pl_eval(np.asarray(xs, dtype=float), fn.xs, fn.ys),
                      dtype=float)


def _ensure_strict(values: np.ndarray, direction: float) -> np.ndarray:
    # Clamped sampling can produce flat runs at the ends; tilt them so the
    # log-difference encoding stays finite.
    vals = values.copy()
    span = max(float(np.abs(np.diff(vals)).max()), 1e-3)
    eps = 1e-4 * span
    for i in range(1, vals.size):
        floor = vals[i - 1] + direction * eps
        if direction * (vals[i] - floor) < 0:
            vals[i] = floor
    return vals


def fit_additive(code: BivariateCode, grid=21, knots_f=16, knots_g=16,
                 knots_m=None, quasi: bool = False, max_iters: int = 500,
                 seed: int = 0, loss_target: float | None = None,
                 init: str = "auto", x0: float | None = None,
                 max_points: int = 400) -> FitResult:
    """Fit m(f(y)+g(r)) to the code by line-searched gradient descent.

    quasi=False ties m to f^-1 (the permutable form); quasi=True fits m as
    a third monotone function over the sum range (the quasi-permutable
    form).  Knot arguments accept a count (uniform knots) or explicit
    sorted arrays.  The loss is the mean squared relative residual over the
    grid, sums falling outside m's tabulated range are clamped; the
    returned loss curve is nonincreasing by construction.  The gauge is
    normalized after the fit: f(x0) = 0 and |g| = 1 at the J' endpoint
    where |g| is largest.

    If loss_target is given and the final loss stays above it,
    NonConvergence is raised with the partial result attached.
    """
    if isinstance(grid, int):
        ny = nr = grid
    else:
        ny, nr = (int(v) for v in grid)
    if ny < 10 or nr < 10:
        raise InvalidParams("fit grid must be at least 10x10")
    if init not in ("auto", "slices"):
        raise InvalidParams(f"unknown init {init!r}")
    J, J2 = code.J, code.J2
    if x0 is None:
        x0 = J.midpoint

    ygrid = J.grid(ny)
    rgrid = J2.grid(nr)
    Y, R = np.meshgrid(ygrid, rgrid, indexing="ij")
    ys_flat = Y.ravel()
    rs_flat = R.ravel()
    truth = np.asarray(code(ys_flat, rs_flat), dtype=float)
    if ys_flat.size > max_points:
        rng = np.random.default_rng(seed)
        pick = np.sort(rng.choice(ys_flat.size, size=max_points, replace=False))
        ys_flat, rs_flat, truth = ys_flat[pick], rs_flat[pick], truth[pick]
    scale = np.maximum(1.0, np.abs(truth))

    # With m tied to f^-1 the sums are read back through f's flipped table,
    # so f's knots must span the code's realized values, not just J;
    # explicit knot arrays are taken as given.
    f_span = J
    if not quasi and isinstance(knots_f, (int, np.integer)):
        f_span = Interval(min(J.lo, float(truth.min())),
                          max(J.hi, float(truth.max())))
    fx = _knot_grid(knots_f, f_span)
    gx = _knot_grid(knots_g, J2)

    f0 = g0 = None
    if init == "auto":
        try:
            f0, g0 = _constructive_init(code)
        except LawError:
            f0 = g0 = None
    if f0 is None:
        # Marginal slices are monotone by the code axioms; tabulate them on
        # J so knots outside J (identifiable only through m) extrapolate.
        r_mid = J2.midpoint
        ytab = J.grid(65)
        slice_f = MonotoneFunction(ytab, code(ytab, r_mid), INCREASING)
        f_init = _extrap_sample(slice_f, fx)
        g_init = (np.asarray(code(x0, np.clip(gx, J2.lo, J2.hi)), dtype=float)
                  - float(code(x0, r_mid)))
    else:
        f_init = _extrap_sample(f0, fx)
        g_init = _extrap_sample(g0, gx)

    g_dir = 1.0 if code.dir_second == INCREASING else -1.0

    def run(f_start, g_start):
        fp = MonotoneParam.from_values(fx, _ensure_strict(f_start, 1.0))
        gp = MonotoneParam.from_values(gx, _ensure_strict(g_start, g_dir))
        mp = None
        if quasi:
            f_vals0, g_vals0 = fp.values(), gp.values()
            s_lo = float(f_vals0.min() + g_vals0.min())
            s_hi = float(f_vals0.max() + g_vals0.max())
            nm = max(fx.size, 8) if knots_m is None else knots_m
            mx = _knot_grid(nm, Interval(s_lo, s_hi))
            # Identity start: with slice-started f, code(y, r_mid) = m(f(y)).
            mp = MonotoneParam.from_values(mx, mx.copy())
        nf, ng = fp.n_params, gp.n_params

        def unpack(vec):
            f = fp.with_packed(vec[:nf])
            g = gp.with_packed(vec[nf:nf + ng])
            m = mp.with_packed(vec[nf + ng:]) if quasi else None
            return f, g, m

        def pred_of(vec) -> np.ndarray:
            f, g, m = unpack(vec)
            fv, gv = f.values(), g.values()
            sums = (_pl_eval(ys_flat, f.knot_xs, fv)
                    + _pl_eval(rs_flat, g.knot_xs, gv))
            if quasi:
                return _pl_eval(sums, m.knot_xs, m.values())
            # m = f^-1: interpolate the flipped table.
            return _pl_eval(sums, fv, f.knot_xs)

        def loss_of_pred(pred) -> float:
            r = (pred - truth) / np.maximum(scale, np.abs(pred))
            return float(r @ r) / r.size

        vec = np.concatenate([fp.pack(), gp.pack()]
                             + ([mp.pack()] if quasi else []))
        n = vec.size
        fd_h = 1e-6

        # Damped least-squares descent on the finite-difference Jacobian,
        # with the residual weights frozen per iteration, falling back to a
        # backtracked gradient step when no damping gives a decrease.  Only
        # strictly decreasing steps are taken: the curve is monotone.
        pred = pred_of(vec)
        cur = loss_of_pred(pred)
        curve = [cur]
        lam = 1.0
        iters = 0
        for iters in range(1, max_iters + 1):
            w = 1.0 / np.maximum(scale, np.abs(pred))
            res = (pred - truth) * w
            jac = np.empty((res.size, n))
            for i in range(n):
                step = fd_h * max(1.0, abs(vec[i]))
                probe = vec.copy()
                probe[i] += step
                jac[:, i] = (pred_of(probe) - pred) * w / step
            grad = 2.0 * (jac.T @ res) / res.size
            gnorm2 = float(grad @ grad)
            if gnorm2 < 1e-30:
                break
            jtj = jac.T @ jac
            # Relative floor: a parameter the grid barely sees must not get
            # an exploding step out of the damping solve.
            dvals = np.diag(jtj)
            diag = np.clip(dvals, max(1e-12, 1e-6 * float(dvals.max())), None)
            rhs = -(jac.T @ res)
            accepted = False
            for _ in range(16):
                try:
                    d = np.linalg.solve(jtj + lam * np.diag(diag), rhs)
                except np.linalg.LinAlgError:
                    d = None
                if d is not None and np.all(np.isfinite(d)):
                    trial = vec + d
                    trial_pred = pred_of(trial)
                    trial_loss = loss_of_pred(trial_pred)
                    if trial_loss < cur:
                        accepted = True
                        lam = max(lam / 3.0, 1e-12)
                        break
                lam = min(lam * 10.0, 1e12)
            if not accepted:
                t = 1.0 / np.sqrt(gnorm2)
                for _ in range(40):
                    trial = vec - t * grad
                    trial_pred = pred_of(trial)
                    trial_loss = loss_of_pred(trial_pred)
                    if trial_loss <= cur - 1e-4 * t * gnorm2:
                        accepted = True
                        break
                    t *= 0.5
            if not accepted:
                break
            vec, cur, pred = trial, trial_loss, trial_pred
            curve.append(cur)
            if loss_target is not None and cur <= loss_target:
                break
            if cur < 1e-16:
                break
        return unpack, vec, cur, curve, iters

    unpack, vec, cur, curve, iters = run(f_init, g_init)
    # A stalled descent from the constructive seed gets one deterministic
    # retry from the marginal-slice seed; keep whichever ends lower.
    stall_at = 1e-10 if loss_target is None else loss_target
    if cur > stall_at and f0 is not None:
        ytab = J.grid(65)
        slice_f = MonotoneFunction(ytab, code(ytab, J2.midpoint), INCREASING)
        f_alt = _extrap_sample(slice_f, fx)
        g_alt = (np.asarray(code(x0, np.clip(gx, J2.lo, J2.hi)), dtype=float)
                 - float(code(x0, J2.midpoint)))
        unpack2, vec2, cur2, curve2, iters2 = run(f_alt, g_alt)
        if cur2 < cur:
            unpack, vec, cur, curve, iters = unpack2, vec2, cur2, curve2, iters2

    f, g, m = unpack(vec)
    rep = _normalized(f, g, m, x0, quasi)
    converged = loss_target is None or cur <= loss_target
    result = FitResult(representation=rep, loss=cur,
                       loss_curve=tuple(curve), n_iters=iters,
                       converged=bool(converged))
    if not converged:
        raise NonConvergence(
            f"loss {cur:.3e} above target {loss_target:.3e} "
            f"after {iters} iterations", result)
    return result


def _normalized(f: MonotoneParam, g: MonotoneParam, m, x0: float,
                quasi: bool) -> AdditiveRepresentation:
    # Gauge: f(x0) = 0, |g| = 1 at the J' endpoint of largest magnitude.
    f_fn = f.to_function()
    g_fn = g.to_function()
    theta = float(f_fn(np.clip(x0, f_fn.domain.lo, f_fn.domain.hi)))
    g_ends = (float(g_fn(g_fn.domain.lo)), float(g_fn(g_fn.domain.hi)))
    r0 = g_fn.domain.lo if abs(g_ends[0]) >= abs(g_ends[1]) else g_fn.domain.hi
    unit = abs(float(g_fn(r0)))
    k = 1.0 / unit if unit > 1e-12 else 1.0

    f_new = MonotoneFunction(f.knot_xs, (f.values() - theta) * k, INCREASING)
    g_vals = g.values() * k
    g_dir = INCREASING if g.direction > 0 else DECREASING
    g_new = MonotoneFunction(g.knot_xs, g_vals, g_dir)
    m_new = None
    if quasi:
        m_new = MonotoneFunction((m.knot_xs - theta) * k, m.values(),
                                 INCREASING)
    unit = 1.0 if float(g_fn(r0)) > 0 else -1.0
    return AdditiveRepresentation(f=f_new, g=g_new,
                                  gauge=Gauge(x0=float(x0), unit=unit),
                                  m=m_new)


def affine_align(f1: MonotoneFunction, f2: MonotoneFunction,
                 sample_xs) -> tuple[AffineMap, float]:
    """Least-squares xi, theta with f2 ~ xi*f1 + theta, xi > 0 enforced.

    The returned error is the max absolute deviation on the samples; a
    large value means the two functions are not affinely related, which is
    the caller's signal, not an exception.
    """
    xs = np.asarray(sample_xs, dtype=float)
    y1 = np.asarray(f1(xs), dtype=float)
    y2 = np.asarray(f2(xs), dtype=float)
    var = float(np.var(y1))
    if var <= 1e-24 * max(1.0, float(np.abs(y1).max()) ** 2):
        raise DegenerateFit("first function is constant on the samples")
    xi = float(np.cov(y1, y2, bias=True)[0, 1] / var)
    xi = max(xi, 1e-12)
    theta = float(np.mean(y2) - xi * np.mean(y1))
    err = float(np.abs(xi * y1 + theta - y2).max())
    return AffineMap(xi=xi, theta=theta), err


@dataclass(frozen=True)
class PairAlignment:
    index_a: int
    index_b: int
    xi: float
    theta: float
    f_err: float
    g_err: float
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "pair": [self.index_a, self.index_b],
            "xi": self.xi,
            "theta": self.theta,
            "f_err": self.f_err,
            "g_err": self.g_err,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class GaugeReport:
    pairs: tuple[PairAlignment, ...]
    tolerance: float
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "check": "gauge-uniqueness",
            "pairs": [p.to_json_dict() for p in self.pairs],
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def check_gauge_uniqueness(code: BivariateCode, configs,
                           align_points: int = 101,
                           tol: float = 1e-3) -> GaugeReport:
    """Construct f, g for each (x0, r0, depth) config and align pairwise.

    Additive representations of one code differ only by f -> xi*f + theta,
    g -> xi*g with a shared xi > 0, so for every pair the f-alignment must
    be tight and the same xi must map g to g with no offset.  Construction
    errors propagate; a pair whose domains do not overlap fails with an
    infinite error rather than raising.
    """
    configs = list(configs)
    if len(configs) < 2:
        raise InvalidParams("need at least two configs to compare")
    built = []
    for cfg in configs:
        x0, r0, depth = cfg
        hs = make_structure(code, x0)
        f = construct_f(hs, r0=r0, depth=20 if depth is None else depth)
        g = construct_g(hs, f)
        built.append((f, g))

    pairs = []
    for a in range(len(built)):
        for b in range(a + 1, len(built)):
            fa, ga = built[a]
            fb, gb = built[b]
            try:
                dom = fa.domain.intersect(fb.domain)
            except InvalidInterval:
                pairs.append(PairAlignment(a, b, float("nan"), float("nan"),
                                           float("inf"), float("inf"), False))
                continue
            xs = dom.grid(align_points)
            amap, f_err = affine_align(fa, fb, xs)
            try:
                gdom = ga.domain.intersect(gb.domain)
                ss = gdom.grid(align_points)
                g_err = float(np.abs(amap.xi * np.asarray(ga(ss))
                                     - np.asarray(gb(ss))).max())
            except InvalidInterval:
                g_err = float("inf")
            passed = bool(amap.xi > 0 and f_err <= tol and g_err <= tol)
            pairs.append(PairAlignment(a, b, amap.xi, amap.theta,
                                       f_err, g_err, passed))
    return GaugeReport(pairs=tuple(pairs), tolerance=float(tol),
                       passed=bool(all(p.passed for p in pairs)))

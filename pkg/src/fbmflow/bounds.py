"""The explicit constant chain behind the pathwise growth bounds.

Given Hölder parameters (alpha, beta) derived from the Hurst index, a
conforming field set and the per-channel Hölder norms of one driving path,
the chain below is evaluated in closed form:

    k1        = (2 alpha + beta - 1) / ((alpha + beta - 1) Gamma(alpha))
    c_alpha   = 1 / Gamma(1 - alpha)
    M1_{g,a}  = alpha M1_g / (1 - 2 alpha)                      (per channel)
    M_alpha   = (1 - alpha)^-1  sum_g M_g  |B_g|_beta
    Mt_alpha  = (2 - 2 alpha)^-1 sum_g M1_{g,a} |B_g|_beta
    K_Delta   = c_alpha n k1 M_alpha / (1 - c_alpha n k1 Mt_alpha Delta^beta)
    K*        = K_Delta / (1 - 2 alpha)
    a_{g,D,1} = (M1_g + alpha M2_g K* Delta^beta) / Gamma(1 - alpha)
    a_{D,1}   = sum_g a_{g,D,1} |B_g|_beta,   a_{D,2} = a_{D,1} / (1 - alpha)
    b_{g,1}   = alpha M1_g / ((beta - alpha) Gamma(1 - alpha))
    b_1       = sum_g b_{g,1} |B_g|_beta,     b_2 = b_1 / (1 - alpha + beta)

The interval length Delta is fixed by a two-branch rule.  Delta_0 solves
Delta_0^-beta = 3 n k1 c_alpha Mt_alpha, which keeps the K_Delta denominator
above 2/3 on (0, Delta_0].  If Delta_0 already satisfies
Delta_0^-beta >= 3 n k1 (a_{D,2} + b_2) it is kept; otherwise Delta is the
unique root of Delta^-beta = 3 n k1 (a_{D,2}(Delta) + b_2), found by
bisection (the left side decreases strictly, the right side increases).  In
both branches every interval-length condition holds with a factor-3 margin,
the per-interval tangent amplification S = [1 - n k1 a_{D,2} Delta^beta /
(1 - n k1 b_2 Delta^beta)]^-1 satisfies S <= 3/2, and the growth rate

    C_T = (3 n k1 max[c_alpha Mt_alpha, a_{D,2} + b_2])^{1/beta} = 1 / Delta.

Degenerate drive (sum_g M1_g |B_g| = 0, e.g. constant or zero fields) makes
the tangent constant; the convention is Delta = T, S = 1, C_T = 0.

Two flavours of the a-coefficients appear.  The solver uses the
Delta-dependent ones above.  For diagnostics that must not depend on Delta,
K* Delta^beta is replaced by its Delta-uniform majorant
sum M |B| / (alpha sum M1 |B|) (stored as ``a2``), and the moment-shape
check further replaces it by the path-independent (1/alpha) sum_g M_g/M1_g
so that its right-hand side is linear in the path norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from .fields import VectorFieldSet
from .flow import FlowTrajectory

__all__ = [
    "BoundConstants",
    "BoundError",
    "DeltaSolution",
    "HausdorffBound",
    "HolderParams",
    "MomentShapeResult",
    "TangentBound",
    "WindowCheckReport",
    "check_flow_windows",
    "compute_constants",
    "default_params",
    "hausdorff_growth_bound",
    "moment_shape_check",
    "singular_increment_integral",
    "solve_delta",
    "tangent_growth_bound",
]

# dev-only: scaled into k1 by the self-test mutation drill to prove the
# battery notices a corrupted constant; never touch in real use
_K1_TAMPER = 1.0

_DELTA_REL_TOL = 1e-10


class BoundError(ValueError):
    """Inadmissible parameters or non-conforming fields."""


# ---------------------------------------------------------------------------
# Hölder parameter bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HolderParams:
    """Exponent bookkeeping: alpha = 1 - H + delta, beta = H - eps.

    ``eps`` trims the path regularity actually used (paths are beta-Hölder
    for every beta < H); ``delta`` lifts the fractional order above 1 - H.
    Admissibility requires 0 < eps < delta, alpha < 1/2, alpha + beta > 1
    and beta > alpha, which is non-empty exactly for H > 1/2.
    """

    hurst: float
    eps: float
    delta: float

    def __post_init__(self) -> None:
        hurst, eps, delta = float(self.hurst), float(self.eps), float(self.delta)
        object.__setattr__(self, "hurst", hurst)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "delta", delta)
        if not (0.5 < hurst < 1.0):
            raise BoundError(f"hurst must lie in (1/2, 1), got {hurst}")
        if not (0.0 < eps < delta):
            raise BoundError(f"need 0 < eps < delta, got eps={eps}, delta={delta}")
        alpha, beta = self.alpha, self.beta
        if not (1.0 - hurst < alpha < 0.5):
            raise BoundError(f"alpha={alpha} outside (1 - H, 1/2) for H={hurst}")
        if not (alpha + beta > 1.0):
            raise BoundError(f"alpha + beta = {alpha + beta} must exceed 1")
        if not (beta > alpha):
            raise BoundError(f"beta={beta} must exceed alpha={alpha}")

    @property
    def alpha(self) -> float:
        return 1.0 - self.hurst + self.delta

    @property
    def beta(self) -> float:
        return self.hurst - self.eps


def default_params(hurst: float) -> HolderParams:
    """Midpoint choice eps = (H - 1/2)/4, delta = (H - 1/2)/2; admissible for all H in (1/2, 1)."""
    hurst = float(hurst)
    if not (0.5 < hurst < 1.0):
        raise BoundError(f"hurst must lie in (1/2, 1), got {hurst}")
    margin = hurst - 0.5
    return HolderParams(hurst=hurst, eps=margin / 4.0, delta=margin / 2.0)


def k1_constant(alpha: float, beta: float) -> float:
    """Kernel constant of the compensated-derivative estimate."""
    return _K1_TAMPER * (2.0 * alpha + beta - 1.0) / ((alpha + beta - 1.0) * gamma_fn(alpha))


# ---------------------------------------------------------------------------
# constant chain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeltaSolution:
    """Interval length and the Delta-dependent tail of the chain."""

    delta0: float
    delta: float
    branch: str  # "regularity" (Delta = Delta_0) or "amplification" (bisection root)
    k_delta: float
    k_star: float
    a_delta1_per_channel: np.ndarray
    a_delta1: float
    a_delta2: float
    s: float
    p: float
    c_t: float


@dataclass(frozen=True)
class BoundConstants:
    """Fully evaluated constant chain for one path realisation."""

    params: HolderParams
    horizon: float
    n: int
    channels: int
    holder_norms: np.ndarray
    k1: float
    c_alpha: float
    m1_alpha_per_channel: np.ndarray
    m_alpha: float
    m_tilde1_alpha: float
    b1_per_channel: np.ndarray
    b1: float
    b2: float
    kstar_uniform: float  # Delta-free majorant of K* Delta^beta
    a2_per_channel: np.ndarray  # Delta-free majorant coefficients
    a2: float
    delta0: float
    delta: float
    branch: str
    k_delta: float
    k_star: float
    a_delta1_per_channel: np.ndarray
    a_delta1: float
    a_delta2: float
    s: float
    p: float
    c_t: float
    degenerate: bool

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def beta(self) -> float:
        return self.params.beta

    def k_delta_at(self, span: float) -> float | None:
        """K over an interval of length ``span``; None when the regularity
        condition (span^-beta > c_alpha n k1 Mt_alpha) fails there."""
        denom = 1.0 - self.c_alpha * self.n * self.k1 * self.m_tilde1_alpha * span**self.beta
        if denom <= 0.0:
            return None
        return self.c_alpha * self.n * self.k1 * self.m_alpha / denom


def _validate_inputs(
    params: HolderParams, fields: VectorFieldSet, holder_norms
) -> np.ndarray:
    if not fields.conforms:
        raise BoundError(
            f"field kind {fields.kind!r} does not conform to the bounded-regularity "
            "assumptions; growth constants are undefined for it"
        )
    norms = np.asarray(holder_norms, dtype=float)
    if norms.shape != (fields.channels,):
        raise BoundError(
            f"need one Hölder norm per channel ({fields.channels}); got shape {norms.shape}"
        )
    if np.any(norms < 0.0) or not np.all(np.isfinite(norms)):
        raise BoundError("Hölder norms must be finite and nonnegative")
    return norms


def solve_delta(
    params: HolderParams,
    fields: VectorFieldSet,
    holder_norms,
    horizon: float,
) -> DeltaSolution:
    """Fix the interval length Delta and evaluate the Delta-dependent constants.

    The returned ``delta`` satisfies its defining equation to 1e-10 relative
    (branch "amplification") or equals Delta_0 exactly (branch "regularity");
    ``c_t`` equals 1/delta in either branch, and ``s <= 3/2``.
    """
    norms = _validate_inputs(params, fields, holder_norms)
    alpha, beta = params.alpha, params.beta
    n = fields.dim
    k1 = k1_constant(alpha, beta)
    c_alpha = 1.0 / gamma_fn(1.0 - alpha)

    m1_alpha = alpha * fields.lip_bounds / (1.0 - 2.0 * alpha)
    m_alpha = float(np.sum(fields.sup_bounds * norms)) / (1.0 - alpha)
    m_tilde = float(np.sum(m1_alpha * norms)) / (2.0 - 2.0 * alpha)
    b1_per = alpha * fields.lip_bounds / ((beta - alpha) * gamma_fn(1.0 - alpha))
    b2 = float(np.sum(b1_per * norms)) / (1.0 - alpha + beta)

    lip_drive = float(np.sum(fields.lip_bounds * norms))
    if lip_drive == 0.0:
        # constant tangent: every interval works, bounded by convention at T
        k_delta = c_alpha * n * k1 * m_alpha
        return DeltaSolution(
            delta0=math.inf,
            delta=float(horizon),
            branch="degenerate",
            k_delta=k_delta,
            k_star=k_delta / (1.0 - 2.0 * alpha),
            a_delta1_per_channel=np.zeros(fields.channels),
            a_delta1=0.0,
            a_delta2=0.0,
            s=1.0,
            p=1.0,
            c_t=0.0,
        )

    delta0 = (3.0 * n * k1 * c_alpha * m_tilde) ** (-1.0 / beta)

    def tail(delta: float) -> tuple[np.ndarray, float, float, float]:
        dbeta = delta**beta
        k_delta = c_alpha * n * k1 * m_alpha / (1.0 - c_alpha * n * k1 * m_tilde * dbeta)
        k_star = k_delta / (1.0 - 2.0 * alpha)
        a1_per = (fields.lip_bounds + alpha * fields.grad_lip_bounds * k_star * dbeta) / gamma_fn(
            1.0 - alpha
        )
        a1 = float(np.sum(a1_per * norms))
        return a1_per, a1, a1 / (1.0 - alpha), k_star

    def defect(delta: float) -> float:
        _, _, a2d, _ = tail(delta)
        return delta ** (-beta) - 3.0 * n * k1 * (a2d + b2)

    if defect(delta0) >= 0.0:
        delta, branch = delta0, "regularity"
    else:
        hi = delta0
        lo = 0.5 * delta0
        guard = 0
        while defect(lo) < 0.0:
            hi = lo
            lo *= 0.5
            guard += 1
            if guard > 400:
                raise BoundError("interval-length bisection failed to bracket a root")
        # defect is strictly decreasing: root in [lo, hi]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if defect(mid) >= 0.0:
                lo = mid
            else:
                hi = mid
            if (hi - lo) <= 1e-14 * lo:
                break
        delta, branch = 0.5 * (lo + hi), "amplification"
        lhs = delta ** (-beta)
        _, _, a2d, _ = tail(delta)
        if abs(lhs - 3.0 * n * k1 * (a2d + b2)) > _DELTA_REL_TOL * lhs:
            raise BoundError("interval-length equation not met to tolerance")

    a1_per, a1, a2d, k_star = tail(delta)
    k_delta = k_star * (1.0 - 2.0 * alpha)

    # all three interval conditions must hold with the designed factor-3 slack
    inv = delta ** (-beta)
    for name, rhs in (
        ("regularity", c_alpha * n * k1 * m_tilde),
        ("drift", n * k1 * b2),
        ("amplification", n * k1 * (a2d + b2)),
    ):
        if not inv >= 3.0 * rhs * (1.0 - 1e-9):
            raise BoundError(f"interval condition '{name}' violated at Delta={delta}")

    w = n * k1 * b2 * delta**beta
    u = n * k1 * a2d * delta**beta
    s = 1.0 / (1.0 - u / (1.0 - w))
    if not (1.0 <= s <= 1.5 + 1e-9):
        raise BoundError(f"per-interval amplification S={s} outside the designed range")

    return DeltaSolution(
        delta0=delta0,
        delta=delta,
        branch=branch,
        k_delta=k_delta,
        k_star=k_star,
        a_delta1_per_channel=a1_per,
        a_delta1=a1,
        a_delta2=a2d,
        s=s,
        p=float(horizon) / delta,
        c_t=1.0 / delta,
    )


def compute_constants(
    params: HolderParams,
    fields: VectorFieldSet,
    holder_norms,
    horizon: float,
) -> BoundConstants:
    """Evaluate the full constant chain for one path realisation."""
    norms = _validate_inputs(params, fields, holder_norms)
    horizon = float(horizon)
    if not (horizon > 0.0 and np.isfinite(horizon)):
        raise BoundError(f"horizon must be a positive real, got {horizon}")
    alpha, beta = params.alpha, params.beta
    n = fields.dim
    k1 = k1_constant(alpha, beta)
    c_alpha = 1.0 / gamma_fn(1.0 - alpha)

    m1_alpha = alpha * fields.lip_bounds / (1.0 - 2.0 * alpha)
    m_alpha = float(np.sum(fields.sup_bounds * norms)) / (1.0 - alpha)
    m_tilde = float(np.sum(m1_alpha * norms)) / (2.0 - 2.0 * alpha)
    b1_per = alpha * fields.lip_bounds / ((beta - alpha) * gamma_fn(1.0 - alpha))
    b1 = float(np.sum(b1_per * norms))
    b2 = b1 / (1.0 - alpha + beta)

    lip_drive = float(np.sum(fields.lip_bounds * norms))
    if lip_drive > 0.0:
        kstar_uniform = float(np.sum(fields.sup_bounds * norms)) / (alpha * lip_drive)
    else:
        kstar_uniform = 0.0
    a2_per = (
        (fields.lip_bounds + alpha * fields.grad_lip_bounds * kstar_uniform)
        / gamma_fn(1.0 - alpha)
        / (1.0 - alpha)
    )
    a2 = float(np.sum(a2_per * norms))

    sol = solve_delta(params, fields, norms, horizon)
    return BoundConstants(
        params=params,
        horizon=horizon,
        n=n,
        channels=fields.channels,
        holder_norms=norms,
        k1=k1,
        c_alpha=c_alpha,
        m1_alpha_per_channel=m1_alpha,
        m_alpha=m_alpha,
        m_tilde1_alpha=m_tilde,
        b1_per_channel=b1_per,
        b1=b1,
        b2=b2,
        kstar_uniform=kstar_uniform,
        a2_per_channel=a2_per,
        a2=a2,
        delta0=sol.delta0,
        delta=sol.delta,
        branch=sol.branch,
        k_delta=sol.k_delta,
        k_star=sol.k_star,
        a_delta1_per_channel=sol.a_delta1_per_channel,
        a_delta1=sol.a_delta1,
        a_delta2=sol.a_delta2,
        s=sol.s,
        p=sol.p,
        c_t=sol.c_t,
        degenerate=(sol.branch == "degenerate"),
    )


# ---------------------------------------------------------------------------
# growth bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TangentBound:
    """S^ceil(p) bound on the l1 length of a transported tangent vector."""

    value: float
    value_log2: float
    power_of_two_value: float  # looser closed form 2^(C_T * T) * |v0|_1
    power_of_two_log2: float
    intervals: int


@dataclass(frozen=True)
class HausdorffBound:
    """m! (sqrt(n) S^ceil(p))^m bound on an m-dimensional pushforward measure."""

    value: float
    value_log2: float
    intervals: int


def _exp2_or_inf(log2_value: float) -> float:
    if log2_value == -math.inf:
        return 0.0
    if log2_value > 1023.0:
        return math.inf
    return 2.0**log2_value


def tangent_growth_bound(constants: BoundConstants, v0_l1_norm: float) -> TangentBound:
    """Certified sup-over-[0,T] bound for |v_t|_1 given |v_0|_1.

    The certified value is S^ceil(p) |v0|_1 (p = T/Delta); the power-of-two
    form 2^(C_T T) |v0|_1 is reported alongside because its exponent is the
    quantity with the |B|^(1/beta) scaling.  For strong drive both can
    overflow; the log2 fields stay finite and are what certification should
    compare against.
    """
    v0 = float(v0_l1_norm)
    if not (v0 >= 0.0 and np.isfinite(v0)):
        raise BoundError(f"|v0|_1 must be finite and nonnegative, got {v0}")
    intervals = max(1, math.ceil(constants.p))
    v0_log2 = math.log2(v0) if v0 > 0.0 else -math.inf
    value_log2 = intervals * math.log2(constants.s) + v0_log2
    pow2_log2 = constants.c_t * constants.horizon + v0_log2
    return TangentBound(
        value=_exp2_or_inf(value_log2),
        value_log2=value_log2,
        power_of_two_value=_exp2_or_inf(pow2_log2),
        power_of_two_log2=pow2_log2,
        intervals=intervals,
    )


def hausdorff_growth_bound(
    constants: BoundConstants, m: int, initial_measure: float
) -> HausdorffBound:
    """Certified sup-over-[0,T] bound for the m-dimensional measure estimate."""
    if not (isinstance(m, (int, np.integer)) and 1 <= m < constants.n):
        raise BoundError(
            f"submanifold dimension must satisfy 1 <= m < n = {constants.n}, got {m!r}"
        )
    mu0 = float(initial_measure)
    if not (mu0 >= 0.0 and np.isfinite(mu0)):
        raise BoundError(f"initial measure must be finite and nonnegative, got {mu0}")
    m = int(m)
    intervals = max(1, math.ceil(constants.p))
    mu_log2 = math.log2(mu0) if mu0 > 0.0 else -math.inf
    value_log2 = (
        math.log2(float(math.factorial(m)))
        + m * (0.5 * math.log2(constants.n) + intervals * math.log2(constants.s))
        + mu_log2
    )
    return HausdorffBound(
        value=_exp2_or_inf(value_log2), value_log2=value_log2, intervals=intervals
    )


# ---------------------------------------------------------------------------
# window certification of the flow estimates
# ---------------------------------------------------------------------------


def singular_increment_integral(
    times: np.ndarray,
    states: np.ndarray,
    start: int,
    stop: int,
    alpha: float,
) -> float:
    """int over [t_start, t_stop] of |x(t_stop) - x(r)| (t_stop - r)^(-1-alpha) dr.

    Trapezoid over the grid nodes with the singular last cell modelled
    linearly (|x(t) - x(r)| grows like the last increment there), which
    makes the cell integral |dx_last| h^-alpha / (1 - alpha) in closed form.
    Batched states (nodes, batch, dim) reduce to the max over the batch.
    """
    if not (0 <= start < stop < len(times)):
        raise BoundError(f"bad window [{start}, {stop}] for {len(times)} nodes")
    h = times[1] - times[0]
    target = states[stop]
    diffs = target - states[start:stop]  # (w, [batch,] dim) or (w,) scalar
    if diffs.ndim == 1:
        mags = np.abs(diffs)
    else:
        mags = np.sqrt(np.sum(diffs * diffs, axis=-1))
    last = mags[-1] * h ** (-alpha) / (1.0 - alpha)
    if stop - start == 1:
        total = last
    else:
        weights = (times[stop] - times[start:stop]) ** (-1.0 - alpha)
        density = mags * (weights if mags.ndim == 1 else weights[:, None])
        total = 0.5 * h * (density[0] + density[-1]) + h * np.sum(density[1:-1], axis=0) + last
    return float(np.max(total))


def _window_holder_sup(times: np.ndarray, states: np.ndarray, exponent: float) -> float:
    """Grid Hölder norm over a window, maximised over any batch axis."""
    m = len(times)
    best = 0.0
    for lag in range(1, m):
        diff = states[lag:] - states[:-lag]
        if diff.ndim == 1:
            mags = np.abs(diff)
        else:
            mags = np.sqrt(np.sum(diff * diff, axis=-1))
        dt = (times[lag:] - times[:-lag]) ** exponent
        best = max(best, float(np.max(mags / (dt if mags.ndim == 1 else dt[:, None]))))
    return best


@dataclass(frozen=True)
class WindowCheckReport:
    """Outcome of certifying the two flow estimates window by window."""

    windows: int
    skipped: int
    increment_violations: int
    holder_violations: int
    max_increment_ratio: float
    max_holder_ratio: float
    window_steps: int
    oversize: bool

    @property
    def violations(self) -> int:
        return self.increment_violations + self.holder_violations


def check_flow_windows(
    trajectory: FlowTrajectory, constants: BoundConstants
) -> WindowCheckReport:
    """Certify, on consecutive windows of at most Delta, the two flow estimates.

    Window [s, t] (grid nodes, length <= Delta whenever the grid resolves
    Delta) must satisfy

        int_s^t |x_t - x_r| (t - r)^(-1-alpha) dr  <=  K* (t - s)^(beta - alpha)
        max grid Hölder ratio of order 1 - alpha   <=  K_Delta (t - s)^(alpha + beta - 1)

    When the grid is coarser than Delta the single-cell windows exceed Delta;
    the bound constants are then re-evaluated at the actual span, and windows
    where the span violates the regularity condition are skipped (counted,
    not certified).
    """
    alpha, beta = constants.alpha, constants.beta
    times = trajectory.times
    states = trajectory.states
    n_steps = trajectory.grid.steps
    h = trajectory.grid.step
    width = max(1, int(math.floor(constants.delta / h + 1e-9)))
    oversize = h > constants.delta * (1.0 + 1e-9)

    edges = list(range(0, n_steps, width)) + [n_steps]
    windows = skipped = inc_viol = hold_viol = 0
    max_inc = 0.0
    max_hold = 0.0
    for s_idx, t_idx in zip(edges[:-1], edges[1:]):
        span = times[t_idx] - times[s_idx]
        if span <= constants.delta * (1.0 + 1e-9):
            k_star = constants.k_star
            k_del = constants.k_delta
        else:
            k_del_w = constants.k_delta_at(span)
            if k_del_w is None:
                skipped += 1
                continue
            k_del = k_del_w
            k_star = k_del_w / (1.0 - 2.0 * alpha)
        windows += 1

        integral = singular_increment_integral(times, states, s_idx, t_idx, alpha)
        inc_bound = k_star * span ** (beta - alpha)
        ratio = integral / inc_bound if inc_bound > 0.0 else (0.0 if integral == 0.0 else math.inf)
        max_inc = max(max_inc, ratio)
        if ratio > 1.0 + 1e-9:
            inc_viol += 1

        hold = _window_holder_sup(times[s_idx : t_idx + 1], states[s_idx : t_idx + 1], 1.0 - alpha)
        hold_bound = k_del * span ** (alpha + beta - 1.0)
        ratio = hold / hold_bound if hold_bound > 0.0 else (0.0 if hold == 0.0 else math.inf)
        max_hold = max(max_hold, ratio)
        if ratio > 1.0 + 1e-9:
            hold_viol += 1

    return WindowCheckReport(
        windows=windows,
        skipped=skipped,
        increment_violations=inc_viol,
        holder_violations=hold_viol,
        max_increment_ratio=max_inc,
        max_holder_ratio=max_hold,
        window_steps=width,
        oversize=oversize,
    )


# ---------------------------------------------------------------------------
# moment-shape diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentShapeResult:
    lhs: float
    rhs: float
    replications: int
    ok: bool


def moment_shape_check(
    params: HolderParams,
    fields: VectorFieldSet,
    c_t_values,
    holder_norm_rows,
) -> MomentShapeResult:
    """Check mean[C_T^beta] against the path-independent linear majorant.

    Pathwise C_T^beta = 3 n k1 max[c_alpha Mt_alpha, a_{D,2} + b_2], and each
    argument of the max is bounded by c_alpha times a fixed linear form in
    the per-channel path norms once K* Delta^beta is replaced by the
    deterministic cap (1/alpha) sum_g M_g / M1_g.  Averaging that pathwise
    inequality gives the moment-shape bound tested here:

        mean[C_T^beta] <= 3 n c_alpha k1 sum_g coeff_g mean[|B_g|_beta].
    """
    alpha, beta = params.alpha, params.beta
    n = fields.dim
    c_t_values = np.asarray(c_t_values, dtype=float)
    norm_rows = np.asarray(holder_norm_rows, dtype=float)
    if norm_rows.ndim != 2 or norm_rows.shape != (len(c_t_values), fields.channels):
        raise BoundError(
            f"holder_norm_rows must have shape (replications, {fields.channels})"
        )
    k1 = k1_constant(alpha, beta)
    c_alpha = 1.0 / gamma_fn(1.0 - alpha)

    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(
            fields.lip_bounds > 0.0, fields.sup_bounds / fields.lip_bounds, 0.0
        )
    cap_det = float(np.sum(ratios)) / alpha
    m_tilde_coeff = alpha * fields.lip_bounds / ((1.0 - 2.0 * alpha) * (2.0 - 2.0 * alpha))
    a2_free = (fields.lip_bounds + alpha * fields.grad_lip_bounds * cap_det) / (1.0 - alpha)
    b2_free = alpha * fields.lip_bounds / ((beta - alpha) * (1.0 - alpha + beta))
    coeff = m_tilde_coeff + a2_free + b2_free

    lhs = float(np.mean(c_t_values**beta))
    rhs = 3.0 * n * c_alpha * k1 * float(np.sum(coeff * np.mean(norm_rows, axis=0)))
    return MomentShapeResult(
        lhs=lhs, rhs=rhs, replications=len(c_t_values), ok=lhs <= rhs * (1.0 + 1e-9)
    )

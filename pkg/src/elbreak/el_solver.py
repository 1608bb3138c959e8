"""Empirical-likelihood inner (dual) and outer (profile) solvers.

A split of the series at ``k`` induces two segments: ``t in {p+1, ..., k}``
and ``t in {k+1, ..., n}`` (lags of the second segment reach back across
``k``). For a segment with rows ``g_t`` and a scale ``s`` (the inverse
segment fraction), the inner problem is

    sup over lam of  sum_t log(1 + s * lam' g_t),  1 + s * lam' g_t > 0,

which is concave in ``lam``; its value is the segment EL log term. The
restricted statistic ``z_h0`` profiles a single (phi, sigma2) over the sum
of both segments' inner values; the unrestricted ``z_h1`` profiles each
segment separately. Their difference is the EL ratio ``-2 log Lambda_k``.

The heavy lifting is JIT-compiled in :mod:`elbreak._kernels`; this module
adds validation, exception mapping and paper-scale reporting of the
multipliers (``lam = mu / s`` for the internal unscaled ``mu``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import _kernels as _k
from .errors import (
    ConvexHullError,
    DegenerateSegment,
    InputError,
    NonConvergence,
    NumericalError,
)
from .estimating import ARSpec, GFrame, TimeSeries, as_series, g_frame, lag_design

__all__ = [
    "SolverSettings",
    "ELSolution",
    "solve_lambda",
    "segment_el",
    "z_h0",
    "z_h1",
    "neg2_log_lambda",
    "h0_objective",
    "h0_scores",
    "DEFAULT_SEED",
]

# Documented default seed for every stochastic entry point (jitter restarts,
# simulation, bootstrap); fixed so casual runs reproduce.
DEFAULT_SEED = 12345

# Outer convergence demands a natural-coordinate gradient below
# _GTOL_FACTOR * n, which keeps the score norms an order of magnitude inside
# their 1e-6 contract.
_GTOL_FACTOR = 1e-7


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances and caps for the EL solvers.

    Attributes
    ----------
    lambda_tol : float
        Gradient tolerance for the inner dual Newton solve.
    beta_tol : float
        Outer step tolerance for the profile optimization.
    max_inner : int
        Iteration cap for the dual solve.
    max_outer : int
        Iteration cap for the profile optimization.
    logstar_eps : float or None
        Pseudo-log threshold; ``None`` selects ``1/m`` per segment of
        length ``m`` (larger values are clamped down to ``1/m``).
    shared_sigma2 : bool
        Estimate one innovation variance across both segments under the
        alternative (the model's single-sigma2 reading; default). With
        ``False`` each segment gets its own variance, which adds a second
        restriction under the null and inflates the statistic beyond its
        r = p calibration; kept as an option for sensitivity analysis.
    jitter_seed : int
        Seed for the deterministic jittered restarts on non-convergence.
    """

    lambda_tol: float = 1e-10
    beta_tol: float = 1e-8
    max_inner: int = 100
    max_outer: int = 200
    logstar_eps: float | None = None
    shared_sigma2: bool = True
    jitter_seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if self.lambda_tol <= 0 or self.beta_tol <= 0:
            raise InputError("tolerances must be positive")
        if self.max_inner < 1 or self.max_outer < 1:
            raise InputError("iteration caps must be >= 1")
        if self.logstar_eps is not None and not (0 < self.logstar_eps < 1):
            raise InputError("logstar_eps must lie in (0, 1)")
        if self.jitter_seed < 0:
            raise InputError("jitter_seed must be nonnegative")

    @property
    def eps_user(self) -> float:
        return -1.0 if self.logstar_eps is None else float(self.logstar_eps)


DEFAULT_SETTINGS = SolverSettings()


@dataclass(frozen=True)
class ELSolution:
    """Result of one empirical-likelihood dual optimization.

    ``lam`` is reported in the scaled parameterization requested by the
    caller; ``weights`` are the implied probabilities, positive and summing
    to one; ``objective`` is the maximized log term (nonnegative).
    """

    lam: NDArray[np.float64]
    beta: ARSpec | None
    objective: float
    weights: NDArray[np.float64]
    converged: bool
    iterations: int
    grad_norm: float


def _raise_status(st: int, context: str) -> None:
    if st == _k.OK:
        return
    if st == _k.HULL:
        raise ConvexHullError(
            f"{context}: the zero vector is outside the convex hull of the "
            "estimating rows; the moment conditions cannot be satisfied"
        )
    if st == _k.DEGENERATE:
        raise DegenerateSegment(f"{context}: degenerate segment")
    if st == _k.NEGSTAT:
        raise NumericalError(
            f"{context}: likelihood-ratio statistic fell below the clamp "
            f"(-{_k.NEG_CLAMP:g}); the outer solver failed"
        )
    raise NonConvergence(f"{context}: iteration cap reached")


def _frame_rows(frame: GFrame | ArrayLike) -> NDArray[np.float64]:
    rows = frame.rows if isinstance(frame, GFrame) else np.asarray(frame, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[:, None]
    if rows.shape[0] < 1:
        raise InputError("frame must contain at least one row")
    if not np.all(np.isfinite(rows)):
        raise InputError("frame contains non-finite entries")
    return np.ascontiguousarray(rows, dtype=np.float64)


def solve_lambda(
    frame: GFrame | ArrayLike,
    scale: float,
    settings: SolverSettings | None = None,
) -> ELSolution:
    """Maximize ``sum_t log(1 + scale * lam' g_t)`` over the multiplier.

    Parameters
    ----------
    frame : GFrame or array-like
        Estimating rows, one observation per row.
    scale : float
        Positive scale applied to the multiplier (the paper's inverse
        segment fraction); the optimum value does not depend on it.
    settings : SolverSettings, optional

    Returns
    -------
    ELSolution
        With ``lam`` in the scaled parameterization and ``weights[i]``
        equal to ``1 / (m * (1 + scale * lam' g_i))``.

    Raises
    ------
    ConvexHullError
        If no multiplier keeps every log argument positive while the
        weighted moments vanish (zero outside the convex hull).
    NonConvergence
        If the Newton iteration cap is reached.
    """
    st_ = settings or DEFAULT_SETTINGS
    if not (np.isfinite(scale) and scale > 0):
        raise InputError(f"scale must be a positive real, got {scale}")
    rows = _frame_rows(frame)
    m = rows.shape[0]
    eps = 1.0 / m
    if st_.logstar_eps is not None and st_.logstar_eps < eps:
        eps = st_.logstar_eps
    mu, f, gnorm, iters, status = _k.dual_newton(
        rows, eps, st_.lambda_tol, st_.max_inner
    )
    _raise_status(int(status), "solve_lambda")
    w = 1.0 + rows @ mu
    weights = 1.0 / (m * w)
    return ELSolution(
        lam=mu / scale,
        beta=None,
        objective=float(f),
        weights=weights,
        converged=True,
        iterations=int(iters),
        grad_norm=float(gnorm),
    )


def segment_el(
    series: TimeSeries | ArrayLike,
    segment: tuple[int, int],
    beta: ARSpec,
    scale: float,
    settings: SolverSettings | None = None,
) -> float:
    """Segment EL log value ``sup_lam sum log(1 + scale * lam' g_t)`` at a
    fixed parameter point. Always nonnegative (``lam = 0`` is feasible)."""
    frame = g_frame(series, beta, segment)
    if frame.m < 2:
        raise InputError("segment must contribute at least 2 estimating rows")
    return solve_lambda(frame, scale, settings).objective


def _split_inputs(
    series: TimeSeries | ArrayLike, k: int, p: int
) -> tuple[NDArray[np.float64], int]:
    s = as_series(series)
    n = s.n
    if p < 1:
        raise InputError(f"AR order must be >= 1, got {p}")
    min_rows = 2 * (p + 2)
    if k - p < min_rows or n - k < min_rows:
        raise DegenerateSegment(
            f"split at k={k} leaves a segment with fewer than {min_rows} "
            f"usable rows (n={n}, p={p})"
        )
    return s.values, n


def _kernel_args(settings: SolverSettings, n: int) -> tuple:
    return (
        settings.eps_user,
        settings.lambda_tol,
        settings.max_inner,
        settings.beta_tol,
        settings.max_outer,
        _GTOL_FACTOR * n,
    )


def z_h0(
    series: TimeSeries | ArrayLike,
    k: int,
    p: int,
    settings: SolverSettings | None = None,
) -> tuple[float, ARSpec]:
    """Restricted statistic: profile one (phi, sigma2) over both segments.

    Returns ``(Z_H0_k, beta0)``. The returned point is certified
    stationary: both score-function norms are at most 1e-6.
    """
    st_ = settings or DEFAULT_SETTINGS
    x, n = _split_inputs(series, k, p)
    x01, L1, x02, L2 = _k.split_segments(x, p, k)
    phi0, s20, st = _k.ols_fit(
        np.concatenate((x01, x02)), np.concatenate((L1, L2))
    )
    _raise_status(int(st), "z_h0")
    inits = np.concatenate((phi0, [np.log(s20)]))[None, :]
    beta, F, gnat, status = _k.profile_solve(
        0, inits, x01, L1, x02, L2, *_kernel_args(st_, n), np.uint64(st_.jitter_seed)
    )
    _raise_status(int(status), "z_h0")
    spec = ARSpec(p=p, phi=beta[:p].copy(), sigma2=float(np.exp(beta[p])))
    lam1, lam2 = _h0_multipliers(x, k, p, spec, st_)
    q1, q2 = h0_scores(x, k, p, spec, (lam1, lam2))
    if max(np.max(np.abs(q1)), np.max(np.abs(q2))) > 1e-6:
        raise NonConvergence(
            "z_h0: score functions exceed 1e-6 at the returned point",
            grad_norm=float(max(np.max(np.abs(q1)), np.max(np.abs(q2)))),
        )
    return 2.0 * float(F), spec


def z_h1(
    series: TimeSeries | ArrayLike,
    k: int,
    p: int,
    settings: SolverSettings | None = None,
) -> tuple[float, tuple[ARSpec, ARSpec]]:
    """Unrestricted statistic: profile each segment's parameters separately.

    Returns ``(Z_H1_k, (beta_pre, beta_post))``. With
    ``settings.shared_sigma2`` the two segment fits share one variance.
    """
    st_ = settings or DEFAULT_SETTINGS
    x, n = _split_inputs(series, k, p)
    x01, L1, x02, L2 = _k.split_segments(x, p, k)
    phi1, s21, st1 = _k.ols_fit(x01, L1)
    _raise_status(int(st1), "z_h1")
    phi2, s22, st2 = _k.ols_fit(x02, L2)
    _raise_status(int(st2), "z_h1")
    args = _kernel_args(st_, n)
    seed = np.uint64(st_.jitter_seed)
    if st_.shared_sigma2:
        m1, m2 = x01.shape[0], x02.shape[0]
        s2p = (m1 * s21 + m2 * s22) / (m1 + m2)
        inits = np.concatenate((phi1, phi2, [np.log(s2p)]))[None, :]
        beta, F, _g, status = _k.profile_solve(
            2, inits, x01, L1, x02, L2, *args, seed
        )
        _raise_status(int(status), "z_h1")
        s2 = float(np.exp(beta[2 * p]))
        pre = ARSpec(p=p, phi=beta[:p].copy(), sigma2=s2)
        post = ARSpec(p=p, phi=beta[p : 2 * p].copy(), sigma2=s2)
        return 2.0 * float(F), (pre, post)
    inits1 = np.concatenate((phi1, [np.log(s21)]))[None, :]
    b1, F1, _g1, sta = _k.profile_solve(1, inits1, x01, L1, x02, L2, *args, seed)
    _raise_status(int(sta), "z_h1")
    inits2 = np.concatenate((phi2, [np.log(s22)]))[None, :]
    b2, F2, _g2, stb = _k.profile_solve(
        1, inits2, x02, L2, x01, L1, *args, seed + np.uint64(1)
    )
    _raise_status(int(stb), "z_h1")
    pre = ARSpec(p=p, phi=b1[:p].copy(), sigma2=float(np.exp(b1[p])))
    post = ARSpec(p=p, phi=b2[:p].copy(), sigma2=float(np.exp(b2[p])))
    return 2.0 * (float(F1) + float(F2)), (pre, post)


def neg2_log_lambda(
    series: TimeSeries | ArrayLike,
    k: int,
    p: int,
    settings: SolverSettings | None = None,
) -> float:
    """EL ratio ``-2 log Lambda_k = Z_H0_k - Z_H1_k`` at the split ``k``.

    Values in ``[-1e-6, 0)`` are clamped to zero; anything more negative
    raises :class:`NumericalError`. The common-parameter optimum seeds the
    per-segment solves, so the nesting holds by construction.
    """
    st_ = settings or DEFAULT_SETTINGS
    x, n = _split_inputs(series, k, p)
    stat, _z0, _z1, status, *_ = _k.stat_at_k(
        x, p, k, st_.shared_sigma2, *_kernel_args(st_, n),
        np.uint64(st_.jitter_seed),
        np.zeros(p + 1), np.zeros(p + 1), np.zeros(p + 1), np.zeros(2 * p + 1),
        False,
    )
    _raise_status(int(status), "neg2_log_lambda")
    return float(stat)


def _h0_multipliers(
    x: NDArray[np.float64],
    k: int,
    p: int,
    beta: ARSpec,
    settings: SolverSettings,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Paper-scale multipliers (lam1, lam2) of the two inner problems at a
    common parameter point."""
    n = x.shape[0]
    theta = k / n
    series = TimeSeries(x)
    sol1 = solve_lambda(g_frame(series, beta, (p + 1, k)), 1.0 / theta, settings)
    sol2 = solve_lambda(g_frame(series, beta, (k + 1, n)), 1.0 / (1.0 - theta), settings)
    return sol1.lam, sol2.lam


def _segment_pieces(
    x: NDArray[np.float64], k: int, p: int, beta: ARSpec
) -> list[tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64], float]]:
    """(rows, lags, residuals, scale) for both segments at a parameter point."""
    n = x.shape[0]
    theta = k / n
    series = TimeSeries(x)
    out = []
    for trange, scale in (((p + 1, k), 1.0 / theta), ((k + 1, n), 1.0 / (1.0 - theta))):
        x0, L = lag_design(series, trange, p)
        eps = x0 - L @ beta.phi
        rows = np.empty((x0.shape[0], p + 2))
        rows[:, 0] = x0
        rows[:, 1 : p + 1] = L * eps[:, None]
        rows[:, p + 1] = eps * eps - beta.sigma2
        out.append((rows, L, eps, scale))
    return out


def h0_objective(
    series: TimeSeries | ArrayLike,
    k: int,
    p: int,
    beta: ARSpec,
    lambdas: Sequence[NDArray[np.float64]],
) -> float:
    """The restricted objective ``2 sum_t log(1 + theta_t^{-1} lam' g_t)``
    as a joint function of the parameter point and the two multipliers."""
    x = as_series(series).values
    lam1, lam2 = (np.asarray(v, dtype=np.float64) for v in lambdas)
    total = 0.0
    for (rows, _L, _e, scale), lam in zip(_segment_pieces(x, k, p, beta), (lam1, lam2)):
        w = 1.0 + scale * (rows @ lam)
        if np.any(w <= 0.0):
            raise InputError("log argument not positive at the supplied point")
        total += float(np.sum(np.log(w)))
    return 2.0 * total


def h0_scores(
    series: TimeSeries | ArrayLike,
    k: int,
    p: int,
    beta: ARSpec,
    lambdas: Sequence[NDArray[np.float64]],
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Score functions of the restricted problem at ``(beta, lambdas)``.

    Returns ``(q1, q2)`` where ``q1`` stacks the two multiplier-block
    derivatives (length ``2(p+2)``) and ``q2`` is the parameter-block
    derivative (length ``p+1``, in (phi, sigma2) coordinates), both with
    the 1/n normalization; the joint objective's exact gradient is
    ``2 n (q1, q2)``.
    """
    x = as_series(series).values
    n = x.shape[0]
    lam1, lam2 = (np.asarray(v, dtype=np.float64) for v in lambdas)
    q1 = np.empty(2 * (p + 2))
    q2 = np.zeros(p + 1)
    for i, ((rows, L, eps, scale), lam) in enumerate(
        zip(_segment_pieces(x, k, p, beta), (lam1, lam2))
    ):
        w = 1.0 + scale * (rows @ lam)
        q1[i * (p + 2) : (i + 1) * (p + 2)] = scale * (rows / w[:, None]).sum(axis=0) / n
        a = L @ lam[1 : p + 1] + 2.0 * lam[p + 1] * eps
        q2[:p] += -scale * (L * (a / w)[:, None]).sum(axis=0) / n
        q2[p] += -scale * lam[p + 1] * np.sum(1.0 / w) / n
    return q1, q2

"""Residuals and estimating-function frames for AR(p) segments.

Time indices at every public interface are 1-based and inclusive, matching
the usual time-series convention: a series ``x`` has observations
``X_1, ..., X_n`` and an index interval ``(a, b)`` covers ``X_a, ..., X_b``.
Internal storage is 0-based numpy.

For an AR(p) fit with coefficients ``phi`` and innovation variance
``sigma2``, the estimating-function row at time ``t`` is the
``(p + 2)``-vector

    (X_t,  X_{t-1} e_t, ..., X_{t-p} e_t,  e_t^2 - sigma2)

with residual ``e_t = X_t - sum_r phi_r X_{t-r}``. The first component is
the zero-mean constraint, the middle block the lag orthogonality
conditions, the last the variance condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateSegment, InputError, NumericalError

__all__ = [
    "TimeSeries",
    "ARSpec",
    "ChangeAlternative",
    "GFrame",
    "as_series",
    "residuals",
    "g_frame",
    "lag_design",
    "fit_ar_ols",
]

# Relative cutoff below which the smallest singular value of a lag design
# marks the segment as rank-deficient.
_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class TimeSeries:
    """An ordered, finite sequence of real observations.

    Attributes
    ----------
    values : NDArray[np.float64]
        The observations ``X_1, ..., X_n`` (stored 0-based).
    """

    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1:
            raise InputError(f"series must be one-dimensional, got shape {arr.shape}")
        if arr.size < 1:
            raise InputError("series must contain at least one observation")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise InputError(f"series contains a non-finite value at index {bad + 1}")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def __len__(self) -> int:
        return self.n


def as_series(data: TimeSeries | ArrayLike) -> TimeSeries:
    """Coerce an array-like into a validated :class:`TimeSeries`."""
    if isinstance(data, TimeSeries):
        return data
    return TimeSeries(np.asarray(data, dtype=np.float64))


@dataclass(frozen=True)
class ARSpec:
    """AR(p) parameterization: order, coefficient vector, innovation variance.

    Parameters
    ----------
    p : int
        Autoregressive order, at least 1.
    phi : NDArray[np.float64]
        Coefficients ``(phi_1, ..., phi_p)``.
    sigma2 : float
        Innovation variance, strictly positive.
    """

    p: int
    phi: NDArray[np.float64]
    sigma2: float

    def __post_init__(self) -> None:
        if self.p < 1:
            raise InputError(f"AR order must be >= 1, got {self.p}")
        phi = np.asarray(self.phi, dtype=np.float64).ravel()
        if phi.size != self.p:
            raise InputError(f"phi must have exactly p={self.p} entries, got {phi.size}")
        if not np.all(np.isfinite(phi)):
            raise InputError("phi contains a non-finite entry")
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise InputError(f"sigma2 must be a positive finite real, got {self.sigma2}")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    def char_roots(self) -> NDArray[np.complex128]:
        """Roots of the characteristic polynomial 1 - phi_1 z - ... - phi_p z^p."""
        coeffs = np.concatenate(([1.0], -self.phi))[::-1]
        return np.roots(coeffs)

    def is_stationary(self, tol: float = 1e-12) -> bool:
        """True when all characteristic roots lie outside the unit circle."""
        roots = self.char_roots()
        if roots.size == 0:
            return True
        return bool(np.all(np.abs(roots) > 1.0 + tol))

    def min_root_modulus(self) -> float:
        """Modulus of the characteristic root closest to the unit circle."""
        roots = self.char_roots()
        if roots.size == 0:
            return np.inf
        return float(np.min(np.abs(roots)))


@dataclass(frozen=True)
class ChangeAlternative:
    """A single coefficient change at a known location.

    ``phi_pre`` governs ``X_t`` for ``t <= k`` and ``phi_post`` for
    ``t > k``; ``delta = phi_post - phi_pre`` is derived, not supplied.
    """

    phi_pre: NDArray[np.float64]
    phi_post: NDArray[np.float64]
    k: int
    sigma2: float
    delta: NDArray[np.float64] = field(init=False)

    def __post_init__(self) -> None:
        pre = np.asarray(self.phi_pre, dtype=np.float64).ravel()
        post = np.asarray(self.phi_post, dtype=np.float64).ravel()
        if pre.size != post.size or pre.size < 1:
            raise InputError("phi_pre and phi_post must be nonempty and the same length")
        if self.k < 1:
            raise InputError(f"change location k must be >= 1, got {self.k}")
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise InputError(f"sigma2 must be a positive finite real, got {self.sigma2}")
        object.__setattr__(self, "phi_pre", pre)
        object.__setattr__(self, "phi_post", post)
        object.__setattr__(self, "delta", post - pre)

    @property
    def p(self) -> int:
        return int(self.phi_pre.size)


@dataclass(frozen=True)
class GFrame:
    """Matrix of estimating-function rows over a time-index interval.

    Attributes
    ----------
    rows : NDArray[np.float64]
        One row per usable time index, each of dimension ``p + 2``.
    index_range : tuple[int, int]
        The 1-based inclusive interval of time indices covered.
    """

    rows: NDArray[np.float64]
    index_range: tuple[int, int]

    @property
    def d(self) -> int:
        return int(self.rows.shape[1])

    @property
    def m(self) -> int:
        return int(self.rows.shape[0])

    def row_mean(self) -> NDArray[np.float64]:
        return self.rows.mean(axis=0)


def _check_range(series: TimeSeries, p: int, trange: tuple[int, int]) -> tuple[int, int]:
    start, stop = int(trange[0]), int(trange[1])
    if start > stop:
        raise InputError(f"empty index interval ({start}, {stop})")
    if stop > series.n:
        raise IndexError(f"interval end {stop} exceeds series length {series.n}")
    if start < p + 1:
        raise IndexError(
            f"interval start {start} requires lags before the series start "
            f"(need start >= p + 1 = {p + 1})"
        )
    return start, stop


def lag_design(
    series: TimeSeries | ArrayLike, trange: tuple[int, int], p: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Current values and lag matrix for the interval.

    Returns ``(x0, L)`` where ``x0[i] = X_t`` and ``L[i, r-1] = X_{t-r}``
    for the i-th time index ``t`` in the interval.
    """
    s = as_series(series)
    start, stop = _check_range(s, p, trange)
    x = s.values
    a, b = start - 1, stop  # 0-based half-open
    x0 = x[a:b].copy()
    m = b - a
    L = np.empty((m, p), dtype=np.float64)
    for r in range(1, p + 1):
        L[:, r - 1] = x[a - r : b - r]
    return x0, L


def residuals(
    series: TimeSeries | ArrayLike, spec: ARSpec, trange: tuple[int, int]
) -> NDArray[np.float64]:
    """AR(p) residuals ``e_t = X_t - sum_r phi_r X_{t-r}`` over the interval.

    Parameters
    ----------
    series : TimeSeries or array-like
        The observations.
    spec : ARSpec
        Coefficients (and variance, unused here).
    trange : tuple[int, int]
        1-based inclusive interval; must start at ``p + 1`` or later.
    """
    x0, L = lag_design(series, trange, spec.p)
    return x0 - L @ spec.phi


def g_frame(
    series: TimeSeries | ArrayLike, spec: ARSpec, trange: tuple[int, int]
) -> GFrame:
    """Estimating-function frame for the interval under ``spec``.

    Each row is ``(X_t, X_{t-1} e_t, ..., X_{t-p} e_t, e_t^2 - sigma2)``;
    the sample mean of the rows is the empirical moment vector.
    """
    x0, L = lag_design(series, trange, spec.p)
    eps = x0 - L @ spec.phi
    rows = np.empty((x0.shape[0], spec.p + 2), dtype=np.float64)
    rows[:, 0] = x0
    rows[:, 1 : spec.p + 1] = L * eps[:, None]
    rows[:, spec.p + 1] = eps * eps - spec.sigma2
    if not np.all(np.isfinite(rows)):
        raise NumericalError("estimating-function frame contains a non-finite value")
    start, stop = int(trange[0]), int(trange[1])
    return GFrame(rows=rows, index_range=(start, stop))


def fit_ar_ols(
    series: TimeSeries | ArrayLike, trange: tuple[int, int], p: int
) -> ARSpec:
    """Least-squares AR(p) fit on the interval.

    The variance is the mean squared residual (maximum-likelihood scaling).

    Raises
    ------
    DegenerateSegment
        If the lag design is rank-deficient or the residual variance is
        numerically zero (e.g. a constant series).
    """
    x0, L = lag_design(series, trange, p)
    if x0.shape[0] < p + 2:
        raise DegenerateSegment(
            f"segment of {x0.shape[0]} rows is too short to fit AR({p})"
        )
    sv = np.linalg.svd(L, compute_uv=False)
    if sv[0] <= 0.0 or sv[-1] <= _RANK_RTOL * sv[0]:
        raise DegenerateSegment("lagged design matrix is rank-deficient")
    phi, *_ = np.linalg.lstsq(L, x0, rcond=None)
    resid = x0 - L @ phi
    sigma2 = float(np.mean(resid**2))
    # relative floor: a perfectly fit (e.g. constant) series leaves only
    # rounding noise in the residuals
    if sigma2 <= 1e-24 * max(float(np.mean(x0**2)), 1e-300):
        raise DegenerateSegment("residual variance is numerically zero")
    return ARSpec(p=p, phi=phi, sigma2=sigma2)

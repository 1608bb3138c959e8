"""Monte Carlo machinery: noise models, AR change generation, power studies.

Every study is fully deterministic given its master seed. Replicate streams
are derived through a counter-based scheme,
``SeedSequence([seed, n, k, noise_code, rep])`` for power cells and
``SeedSequence([seed, rep])`` for single-cell studies, so parallel execution
cannot reorder draws.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from . import _kernels as _k
from .el_solver import DEFAULT_SEED, DEFAULT_SETTINGS, SolverSettings
from .errors import InputError, ScanError
from .estimating import ARSpec, TimeSeries
from .scan import (
    CalibrationConstants,
    default_trim,
    gumbel_quantile,
    _k_range,
    _scan_values,
)

__all__ = [
    "NoiseModel",
    "PowerStudyConfig",
    "PowerTable",
    "CritvalStudy",
    "sample_noise",
    "gen_ar_change",
    "power_study",
    "empirical_critval_study",
]

DEFAULT_BURN_IN = 500


class NoiseModel(str, enum.Enum):
    """Standardized innovation laws used in the power study.

    All four have mean zero; the first three have unit variance and the
    scaled t with 4 degrees of freedom has unit variance with heavy tails.
    """

    GAUSSIAN = "gaussian"
    CENTERED_EXPONENTIAL = "centered_exponential"
    STANDARDIZED_CHISQ4 = "standardized_chisq4"
    SCALED_T4 = "scaled_t4"

    @classmethod
    def from_name(cls, name: str) -> "NoiseModel":
        key = name.strip().lower()
        for model in cls:
            if model.value == key:
                return model
        raise InputError(
            f"unknown noise model {name!r}; expected one of "
            f"{', '.join(m.value for m in cls)}"
        )

    @property
    def code(self) -> int:
        return list(type(self)).index(self)


def sample_noise(
    kind: NoiseModel,
    count: int,
    seed: int | np.random.Generator = DEFAULT_SEED,
) -> NDArray[np.float64]:
    """i.i.d. draws from the standardized law; deterministic given the seed."""
    if count < 1:
        raise InputError(f"count must be >= 1, got {count}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if kind == NoiseModel.GAUSSIAN:
        return rng.standard_normal(count)
    if kind == NoiseModel.CENTERED_EXPONENTIAL:
        return rng.standard_exponential(count) - 1.0
    if kind == NoiseModel.STANDARDIZED_CHISQ4:
        return (rng.chisquare(4.0, count) - 4.0) / (2.0 * np.sqrt(2.0))
    if kind == NoiseModel.SCALED_T4:
        return rng.standard_t(4.0, count) / np.sqrt(2.0)
    raise InputError(f"unknown noise model {kind!r}")


def _as_phi(phi) -> NDArray[np.float64]:
    arr = np.atleast_1d(np.asarray(phi, dtype=np.float64)).ravel()
    if arr.size < 1:
        raise InputError("coefficient vector must be nonempty")
    return arr


def gen_ar_change(
    n: int,
    k: int,
    phi_pre,
    phi_post,
    noise: NoiseModel = NoiseModel.GAUSSIAN,
    burn_in: int = DEFAULT_BURN_IN,
    seed: int | np.random.Generator = DEFAULT_SEED,
) -> TimeSeries:
    """Simulate an AR(p) series whose coefficients switch after index ``k``.

    The recursion starts from a zero state, runs ``burn_in`` discarded
    warm-up steps under ``phi_pre`` so ``X_1`` is near stationarity, and
    switches to ``phi_post`` at ``t = k + 1`` without resetting the state.
    Innovations are standardized draws from ``noise``.

    Raises
    ------
    InputError
        If either coefficient vector is non-stationary or ``k`` is outside
        ``[1, n)``.
    """
    pre = _as_phi(phi_pre)
    post = _as_phi(phi_post)
    if pre.size != post.size:
        raise InputError("phi_pre and phi_post must have the same length")
    if not (1 <= k < n):
        raise InputError(f"change location k={k} must satisfy 1 <= k < n={n}")
    if burn_in < 0:
        raise InputError(f"burn_in must be nonnegative, got {burn_in}")
    for name, phi in (("phi_pre", pre), ("phi_post", post)):
        spec = ARSpec(p=pre.size, phi=phi, sigma2=1.0)
        if not spec.is_stationary():
            raise InputError(
                f"{name} is non-stationary (root modulus "
                f"{spec.min_root_modulus():.6f} <= 1)"
            )
    draws = sample_noise(noise, burn_in + n, seed)
    return TimeSeries(_k.ar_change_path(draws, pre, post, k, burn_in))


@dataclass(frozen=True)
class PowerStudyConfig:
    """Grid specification for a rejection-frequency study.

    ``k_values`` maps each sample size to its change locations. The same
    coefficient pair, noise kinds, level, and replicate count apply to every
    cell.
    """

    k_values: dict[int, tuple[int, ...]]
    phi_pre: tuple[float, ...]
    phi_post: tuple[float, ...]
    noise_kinds: tuple[NoiseModel, ...]
    reps: int = 1000
    alpha: float = 0.05
    seed: int = DEFAULT_SEED
    burn_in: int = DEFAULT_BURN_IN

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise InputError(f"reps must be >= 1, got {self.reps}")
        if not 0 < self.alpha < 1:
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.k_values:
            raise InputError("at least one sample size with k values is required")
        if not self.noise_kinds:
            raise InputError("at least one noise model is required")
        if len(self.phi_pre) != len(self.phi_post):
            raise InputError("phi_pre and phi_post must have the same length")
        for n, ks in self.k_values.items():
            t1, t2 = default_trim(n)
            for k in ks:
                if not t1 <= k <= n - t2:
                    raise InputError(
                        f"change location k={k} lies outside the trimmed "
                        f"range [{t1}, {n - t2}] at n={n}"
                    )

    @property
    def n_values(self) -> tuple[int, ...]:
        return tuple(sorted(self.k_values))

    @property
    def p(self) -> int:
        return len(self.phi_pre)


@dataclass(frozen=True)
class PowerTable:
    """Rejection frequencies indexed by (n, k, noise)."""

    cells: dict[tuple[int, int, str], float]
    failures: dict[tuple[int, int, str], int]
    reps: int
    alpha: float
    seed: int

    def flagged(self) -> tuple[tuple[int, int, str], ...]:
        """Cells with more than 5% failed replicates."""
        return tuple(
            key for key, nf in sorted(self.failures.items())
            if nf > 0.05 * self.reps
        )

    def to_csv(self) -> str:
        lines = ["n,k,noise,power,reps,failures"]
        for (n, k, noise) in sorted(self.cells):
            lines.append(
                f"{n},{k},{noise},{self.cells[(n, k, noise)]:.6f},"
                f"{self.reps},{self.failures[(n, k, noise)]}"
            )
        return "\n".join(lines) + "\n"


def _study_jobs(jobs: int | None) -> int:
    if jobs is None:
        jobs = int(os.environ.get("ELBREAK_JOBS", "1"))
    if jobs < 1:
        raise InputError(f"jobs must be >= 1, got {jobs}")
    return jobs


def _cell_power(
    n: int,
    k: int,
    noise: NoiseModel,
    config: PowerStudyConfig,
    settings: SolverSettings,
    jobs: int,
) -> tuple[float, int]:
    """Rejection fraction and failure count for one (n, k, noise) cell."""
    p = config.p
    pre = np.asarray(config.phi_pre, dtype=np.float64)
    post = np.asarray(config.phi_post, dtype=np.float64)
    trim = default_trim(n)
    ks, _ = _k_range(n, p, trim)
    calib = CalibrationConstants.for_sample(n, p)
    t_alpha = gumbel_quantile(config.alpha)

    def one_rep(rep: int) -> int:
        """1 reject, 0 retain, -1 failed."""
        ss = np.random.SeedSequence([config.seed, n, k, noise.code, rep])
        draws = sample_noise(noise, config.burn_in + n, np.random.default_rng(ss))
        x = _k.ar_change_path(draws, pre, post, k, config.burn_in)
        vals, codes = _scan_values(x, p, ks, settings, jobs=1)
        good = codes == _k.OK
        n_fail = int(np.sum(~good))
        if n_fail > 0.2 * ks.shape[0] or not np.any(good):
            return -1
        t_norm = calib.a_val * np.sqrt(np.max(vals[good])) - calib.d_val
        return 1 if t_norm >= t_alpha else 0

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(one_rep, range(config.reps)))
    else:
        outcomes = [one_rep(rep) for rep in range(config.reps)]
    failures = sum(1 for o in outcomes if o < 0)
    rejects = sum(1 for o in outcomes if o == 1)
    denom = config.reps - failures
    power = rejects / denom if denom > 0 else float("nan")
    return power, failures


def power_study(
    config: PowerStudyConfig,
    settings: SolverSettings | None = None,
    jobs: int | None = None,
) -> PowerTable:
    """Rejection frequency of the trimmed scan over the configured grid.

    Each replicate simulates a series with the configured change, runs the
    trimmed scan, and rejects when the normalized maximum exceeds the
    theoretical Gumbel critical value at the configured level. Bit-for-bit
    deterministic given the seed, sequential or parallel.
    """
    st_ = settings or DEFAULT_SETTINGS
    jobs_eff = _study_jobs(jobs)
    cells: dict[tuple[int, int, str], float] = {}
    failures: dict[tuple[int, int, str], int] = {}
    for n in config.n_values:
        for k in config.k_values[n]:
            for noise in config.noise_kinds:
                power, nf = _cell_power(n, k, noise, config, st_, jobs_eff)
                cells[(n, k, noise.value)] = power
                failures[(n, k, noise.value)] = nf
    return PowerTable(
        cells=cells,
        failures=failures,
        reps=config.reps,
        alpha=config.alpha,
        seed=config.seed,
    )


@dataclass(frozen=True)
class CritvalStudy:
    """Empirical null quantiles of the normalized statistic vs theory."""

    n: int
    p: int
    noise: NoiseModel
    reps: int
    levels: tuple[float, ...]
    empirical: tuple[float, ...]
    theoretical: tuple[float, ...]
    failures: int
    seed: int


def empirical_critval_study(
    n: int,
    p: int,
    noise: NoiseModel,
    reps: int,
    levels: tuple[float, ...],
    seed: int = DEFAULT_SEED,
    phi=None,
    settings: SolverSettings | None = None,
    jobs: int | None = None,
    burn_in: int = DEFAULT_BURN_IN,
) -> CritvalStudy:
    """Simulate no-change series and compare upper quantiles of the
    normalized statistic with the theoretical Gumbel quantiles.

    ``phi`` is the null coefficient vector (default: 0.3 on the first lag).
    """
    if reps < 500:
        raise InputError(f"critical-value study needs reps >= 500, got {reps}")
    for a in levels:
        if not 0 < a < 1:
            raise InputError(f"levels must lie in (0, 1), got {a}")
    st_ = settings or DEFAULT_SETTINGS
    jobs_eff = _study_jobs(jobs)
    phi_arr = (
        np.asarray(phi, dtype=np.float64).ravel()
        if phi is not None
        else np.array([0.3] + [0.0] * (p - 1))
    )
    if phi_arr.size != p:
        raise InputError(f"phi must have p={p} entries, got {phi_arr.size}")
    spec = ARSpec(p=p, phi=phi_arr, sigma2=1.0)
    if not spec.is_stationary():
        raise InputError("null coefficient vector is non-stationary")
    trim = default_trim(n)
    ks, _ = _k_range(n, p, trim)
    calib = CalibrationConstants.for_sample(n, p)

    def one_rep(rep: int) -> float:
        ss = np.random.SeedSequence([seed, rep])
        draws = sample_noise(noise, burn_in + n, np.random.default_rng(ss))
        x = _k.ar_change_path(draws, phi_arr, phi_arr, n, burn_in)
        vals, codes = _scan_values(x, p, ks, st_, jobs=1)
        good = codes == _k.OK
        if int(np.sum(~good)) > 0.2 * ks.shape[0] or not np.any(good):
            return np.nan
        return calib.a_val * np.sqrt(np.max(vals[good])) - calib.d_val

    if jobs_eff > 1:
        with ThreadPoolExecutor(max_workers=jobs_eff) as pool:
            stats = np.array(list(pool.map(one_rep, range(reps))))
    else:
        stats = np.array([one_rep(rep) for rep in range(reps)])
    ok = np.isfinite(stats)
    n_fail = int(np.sum(~ok))
    if not np.any(ok):
        raise ScanError("all replicates failed", cause_counts={})
    emp = tuple(float(np.quantile(stats[ok], 1.0 - a)) for a in levels)
    theo = tuple(gumbel_quantile(a) for a in levels)
    return CritvalStudy(
        n=n,
        p=p,
        noise=noise,
        reps=reps,
        levels=tuple(float(a) for a in levels),
        empirical=emp,
        theoretical=theo,
        failures=n_fail,
        seed=seed,
    )


def parse_power_config(text: str, path: str = "<config>") -> PowerStudyConfig:
    """Parse the plain-text key-value study config.

    Recognized keys: ``phi_pre``, ``phi_post``, ``noise``, ``reps``,
    ``alpha``, ``seed``, ``burn_in``, and one ``k_<n>`` entry per sample
    size (comma-separated change locations). ``#`` starts a comment.
    Errors carry 1-based line numbers.
    """
    values: dict[str, tuple[int, str]] = {}
    k_values: dict[int, tuple[int, ...]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip().lower()
        val = val.strip()
        if not val:
            raise InputError(f"{path}:{lineno}: empty value for {key!r}")
        if key.startswith("k_"):
            try:
                n = int(key[2:])
            except ValueError:
                raise InputError(f"{path}:{lineno}: bad sample size in {key!r}") from None
            try:
                ks = tuple(int(tok) for tok in val.split(","))
            except ValueError:
                raise InputError(f"{path}:{lineno}: expected integers for {key!r}") from None
            if n in k_values:
                raise InputError(f"{path}:{lineno}: duplicate entry for n={n}")
            k_values[n] = ks
        elif key in {"phi_pre", "phi_post", "noise", "reps", "alpha", "seed", "burn_in"}:
            if key in values:
                raise InputError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = (lineno, val)
        else:
            raise InputError(f"{path}:{lineno}: unknown key {key!r}")

    def need(key: str) -> tuple[int, str]:
        if key not in values:
            raise InputError(f"{path}: missing required key {key!r}")
        return values[key]

    def floats(key: str) -> tuple[float, ...]:
        lineno, val = need(key)
        try:
            return tuple(float(tok) for tok in val.split(","))
        except ValueError:
            raise InputError(f"{path}:{lineno}: expected numbers for {key!r}") from None

    def integer(key: str, default: int) -> int:
        if key not in values:
            return default
        lineno, val = values[key]
        try:
            return int(val)
        except ValueError:
            raise InputError(f"{path}:{lineno}: expected an integer for {key!r}") from None

    if not k_values:
        raise InputError(f"{path}: at least one 'k_<n> = ...' entry is required")
    lineno, noise_val = need("noise")
    try:
        kinds = tuple(NoiseModel.from_name(tok) for tok in noise_val.split(","))
    except InputError as exc:
        raise InputError(f"{path}:{lineno}: {exc}") from None
    alpha = 0.05
    if "alpha" in values:
        lineno, val = values["alpha"]
        try:
            alpha = float(val)
        except ValueError:
            raise InputError(f"{path}:{lineno}: expected a number for 'alpha'") from None
    try:
        return PowerStudyConfig(
            k_values=k_values,
            phi_pre=floats("phi_pre"),
            phi_post=floats("phi_post"),
            noise_kinds=kinds,
            reps=integer("reps", 1000),
            alpha=alpha,
            seed=integer("seed", DEFAULT_SEED),
            burn_in=integer("burn_in", DEFAULT_BURN_IN),
        )
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None

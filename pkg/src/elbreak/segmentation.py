"""Multiple change points by recursive binary segmentation.

The full series is scanned for a single change; on rejection the estimated
split is recorded and the two subseries on either side are scanned again.
Recursion stops on non-rejection, on intervals shorter than ``min_len``,
or on intervals the scan cannot process (marked inconclusive).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from .el_solver import DEFAULT_SETTINGS, SolverSettings
from .errors import InputError, ScanError
from .estimating import TimeSeries, as_series
from .scan import ScanResult, trimmed_scan

__all__ = ["SegmentNode", "SegmentationResult", "binary_segment"]

# Below this interval length the asymptotic calibration is unreliable;
# bootstrap mode is advised instead (see the CLI help).
DEFAULT_MIN_LEN = 50


@dataclass(frozen=True)
class SegmentNode:
    """One node of the segmentation recursion.

    ``start``/``end`` are global 1-based inclusive bounds. ``decision`` is
    one of ``"reject"`` (change found at ``change_point``), ``"retain"``,
    ``"too-short"``, or ``"inconclusive"`` (scan failed).
    """

    start: int
    end: int
    depth: int
    decision: str
    alpha: float
    change_point: int | None = None
    scan: ScanResult | None = None
    note: str = ""

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def to_dict(self) -> dict:
        return {
            "start": self.start,
            "end": self.end,
            "depth": self.depth,
            "decision": self.decision,
            "alpha": self.alpha,
            "change_point": self.change_point,
            "note": self.note,
            "scan": self.scan.to_dict() if self.scan is not None else None,
        }


@dataclass(frozen=True)
class SegmentationResult:
    """All accepted change points plus the full recursion trace."""

    change_points: tuple[int, ...]
    tree: tuple[SegmentNode, ...]
    alpha: float
    min_len: int

    def to_dict(self) -> dict:
        return {
            "change_points": list(self.change_points),
            "alpha": self.alpha,
            "min_len": self.min_len,
            "tree": [node.to_dict() for node in self.tree],
        }


def binary_segment(
    series: TimeSeries | ArrayLike,
    p: int,
    alpha: float = 0.05,
    min_len: int = DEFAULT_MIN_LEN,
    settings: SolverSettings | None = None,
    depth_adjust: bool = False,
    r: int | None = None,
    jobs: int | None = None,
) -> SegmentationResult:
    """Detect multiple coefficient changes by recursive splitting.

    Parameters
    ----------
    series : TimeSeries or array-like
    p : int
        AR order.
    alpha : float
        Per-node test level; with ``depth_adjust`` the level at depth ``d``
        becomes ``alpha / 2**d`` (conservative Bonferroni-style use).
    min_len : int
        Intervals shorter than this are not tested.
    r, jobs : optional
        Passed through to :func:`elbreak.scan.trimmed_scan`.

    Notes
    -----
    Each node's trimming is recomputed from its own interval length, so
    trimming shrinks with the interval. A failed node (ScanError) stops
    only its own branch and is reported as inconclusive.
    """
    st_ = settings or DEFAULT_SETTINGS
    if min_len < 25:
        raise InputError(
            f"min_len must be at least 25 (the scan's minimum viable "
            f"length), got {min_len}"
        )
    if not 0 < alpha < 1:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    s = as_series(series)
    x = s.values
    nodes: list[SegmentNode] = []
    changes: list[int] = []

    def visit(start: int, end: int, depth: int) -> None:
        length = end - start + 1
        level = alpha / (2.0**depth) if depth_adjust else alpha
        if length < min_len:
            nodes.append(
                SegmentNode(
                    start=start, end=end, depth=depth, decision="too-short",
                    alpha=level, note=f"interval length {length} < min_len {min_len}",
                )
            )
            return
        sub = TimeSeries(x[start - 1 : end])
        try:
            scan = trimmed_scan(sub, p, alpha=level, settings=st_, r=r, jobs=jobs)
        except (ScanError, InputError) as exc:
            nodes.append(
                SegmentNode(
                    start=start, end=end, depth=depth, decision="inconclusive",
                    alpha=level, note=str(exc),
                )
            )
            return
        if not scan.reject:
            nodes.append(
                SegmentNode(
                    start=start, end=end, depth=depth, decision="retain",
                    alpha=level, scan=scan,
                )
            )
            return
        k_global = start - 1 + scan.k_hat
        nodes.append(
            SegmentNode(
                start=start, end=end, depth=depth, decision="reject",
                alpha=level, change_point=k_global, scan=scan,
            )
        )
        changes.append(k_global)
        visit(start, k_global, depth + 1)
        visit(k_global + 1, end, depth + 1)

    visit(1, s.n, 0)
    return SegmentationResult(
        change_points=tuple(sorted(changes)),
        tree=tuple(nodes),
        alpha=alpha,
        min_len=min_len,
    )

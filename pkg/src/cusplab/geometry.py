"""Domains, graded quadrature grids, and refinement-based integral verdicts.

The integration engine never asks for a value at the singular face ``x_n = 0``
(or at the origin of a ball): every node is a cell centroid strictly inside
the domain.  Finiteness and divergence are decided from a refinement trace in
which each level roughly squares the number of resolved decades next to the
singular face, so that even logarithmic divergences grow geometrically from
level to level.

Cusp domains are never meshed directly.  Integrals over ``H_g`` are computed
in reference coordinates ``(u, t)`` on the unit box, ``x_i = u_i * g_i(t)``,
``x_n = t``, with the cross-section volume ``G(t) = prod g_i(t)`` folded in as
an analytic weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "Box",
    "Ball",
    "CuspDomain",
    "Domain",
    "EvaluationError",
    "IntegralVerdict",
    "QuadratureGrid",
    "RefinementSchedule",
    "Verdict",
    "aggregate_gamma",
    "build_grid",
    "contains",
    "fixed_grid_sum",
    "h1_domain",
    "integrate",
    "unit_interval",
]


class EvaluationError(RuntimeError):
    """Integrand returned a non-finite value at an interior node."""


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``prod (lo_i, hi_i)``.

    ``singular_axis`` marks an axis whose *lower* face may carry an
    integrable singularity; refinement then grades toward that face.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    singular_axis: int | None = None

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi must have equal length")
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError("box must have positive extent on every axis")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(np.asarray(self.hi) - np.asarray(self.lo)))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"point has dimension {x.shape}, expected {self.dim}")
        return bool(np.all(x > self.lo) and np.all(x < self.hi))


@dataclass(frozen=True)
class Ball:
    """Open ball.  ``singular_center=True`` grades refinement toward the center."""

    center: tuple[float, ...]
    radius: float
    singular_center: bool = False

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        n = self.dim
        return float(math.pi ** (n / 2) / math.gamma(n / 2 + 1) * self.radius**n)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"point has dimension {x.shape}, expected {self.dim}")
        return bool(np.linalg.norm(x - np.asarray(self.center)) < self.radius)


@dataclass(frozen=True)
class CuspDomain:
    """Anisotropic power cusp ``{0 < x_n < 1, 0 < x_i < g_i(x_n)}``.

    Profiles are ``g_i(t) = c * t**exponents[i]`` with every exponent >= 1;
    ``scale_bounds = (C1, C2)`` admits generalized profiles pinched between
    ``C1 t**gamma_i`` and ``C2 t**gamma_i``.  Membership and integrals are
    evaluated on the ``C2`` envelope; every finiteness verdict computed here
    is independent of the constants.
    """

    dim: int
    exponents: tuple[float, ...]
    scale_bounds: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("cusp domain needs dimension >= 2")
        if len(self.exponents) != self.dim - 1:
            raise ValueError("need one profile exponent per transverse axis")
        if any(g < 1.0 for g in self.exponents):
            raise ValueError("profile exponents must be >= 1")
        c1, c2 = self.scale_bounds
        if not (0 < c1 <= c2):
            raise ValueError("scale bounds must satisfy 0 < C1 <= C2")
        object.__setattr__(self, "exponents", tuple(float(g) for g in self.exponents))

    @property
    def gamma(self) -> float:
        """Aggregate exponent ``1 + sum gamma_i`` (equals n for the Lipschitz case)."""
        return 1.0 + float(sum(self.exponents))

    @property
    def sigma(self) -> float:
        return (self.gamma - 1.0) / (self.dim - 1)

    @property
    def profile_scale(self) -> float:
        return float(self.scale_bounds[1])

    def profiles(self, t):
        """Per-axis widths ``g_i(t)``, shape ``(..., n-1)``."""
        t = np.asarray(t, dtype=float)
        exps = np.asarray(self.exponents)
        return self.profile_scale * t[..., None] ** exps

    def cross_section(self, t):
        """Cross-section volume ``G(t) = prod_i g_i(t)``."""
        t = np.asarray(t, dtype=float)
        c = self.profile_scale ** (self.dim - 1)
        return c * t ** (self.gamma - 1.0)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"point has dimension {x.shape}, expected {self.dim}")
        t = x[-1]
        if not (0.0 < t < 1.0):
            return False
        return bool(np.all(x[:-1] > 0.0) and np.all(x[:-1] < self.profiles(t)))

    @property
    def volume(self) -> float:
        # integral of G over (0,1)
        return self.profile_scale ** (self.dim - 1) / self.gamma


Domain = Union[Box, Ball, CuspDomain]


def h1_domain(dim: int) -> CuspDomain:
    """The Lipschitz reference cusp (all profile exponents equal to 1)."""
    return CuspDomain(dim=dim, exponents=(1.0,) * (dim - 1))


def unit_interval() -> Box:
    """``(0, 1)`` with the singular face at 0, for reduced 1-D integrals."""
    return Box(lo=(0.0,), hi=(1.0,), singular_axis=0)


def contains(domain: Domain, x) -> bool:
    """Strict-interior membership test; raises on dimension mismatch."""
    return domain.contains(x)


def aggregate_gamma(domain: CuspDomain) -> float:
    """Aggregate cusp exponent; see :attr:`CuspDomain.gamma`."""
    return domain.gamma


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureGrid:
    """Centroid-rule cells over a reference box, mapped to physical points.

    ``centers``/``widths`` live in reference coordinates and tile the
    reference box with overlap of measure zero; ``weights`` carry the cell
    volume times any analytic factor (cusp cross-section, polar radius), so
    ``sum(weights * f(points))`` approximates the physical integral.
    """

    domain: Domain
    levels: int
    grading: float
    centers: np.ndarray
    widths: np.ndarray
    weights: np.ndarray
    points: np.ndarray

    @property
    def cell_count(self) -> int:
        return int(self.centers.shape[0])

    def total_measure(self) -> float:
        return float(np.sum(self.weights))

    def to_dict(self) -> dict:
        return {
            "cells": self.cell_count,
            "levels": self.levels,
            "grading": self.grading,
            "measure": self.total_measure(),
        }


def _axis_cells(lo: float, hi: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(lo, hi, m + 1)
    return 0.5 * (edges[1:] + edges[:-1]), np.diff(edges)


def _graded_axis_cells(
    lo: float, hi: float, decades: float, panels_per_decade: int
) -> tuple[np.ndarray, np.ndarray]:
    """Geometric panels on ``(lo, hi]`` resolving ``decades`` decades above ``lo``."""
    span = hi - lo
    m = max(2, int(math.ceil(decades * panels_per_decade)))
    # offsets from the singular face, geometric from span*10**-decades up to span
    edges = lo + span * 10.0 ** (-decades * (1.0 - np.arange(m + 1) / m))
    edges[-1] = hi
    return 0.5 * (edges[1:] + edges[:-1]), np.diff(edges)


def _tensor_cells(per_axis: Sequence[tuple[np.ndarray, np.ndarray]]):
    centers_1d = [c for c, _ in per_axis]
    widths_1d = [w for _, w in per_axis]
    grids_c = np.meshgrid(*centers_1d, indexing="ij")
    grids_w = np.meshgrid(*widths_1d, indexing="ij")
    centers = np.stack([g.ravel() for g in grids_c], axis=-1)
    widths = np.stack([g.ravel() for g in grids_w], axis=-1)
    return centers, widths


def _cusp_reference_grid(
    domain: CuspDomain, decades: float, panels_per_decade: int, cross: int
) -> QuadratureGrid:
    n = domain.dim
    t_cells = _graded_axis_cells(0.0, 1.0, decades, panels_per_decade)
    per_axis = [_axis_cells(0.0, 1.0, cross) for _ in range(n - 1)] + [t_cells]
    centers, widths = _tensor_cells(per_axis)
    t = centers[:, -1]
    vol = np.prod(widths, axis=1)
    weights = vol * domain.cross_section(t)
    points = np.empty_like(centers)
    points[:, :-1] = centers[:, :-1] * domain.profiles(t)
    points[:, -1] = t
    return QuadratureGrid(domain, 0, 0.0, centers, widths, weights, points)


def _box_grid(
    box: Box,
    uniform_cells: int,
    decades: float,
    panels_per_decade: int,
) -> QuadratureGrid:
    per_axis = []
    for ax in range(box.dim):
        if box.singular_axis == ax:
            per_axis.append(
                _graded_axis_cells(box.lo[ax], box.hi[ax], decades, panels_per_decade)
            )
        else:
            per_axis.append(_axis_cells(box.lo[ax], box.hi[ax], uniform_cells))
    centers, widths = _tensor_cells(per_axis)
    weights = np.prod(widths, axis=1)
    return QuadratureGrid(box, 0, 0.0, centers, widths, weights, centers)


def _ball_grid(
    ball: Ball, decades: float, panels_per_decade: int, cross: int
) -> QuadratureGrid:
    if ball.dim != 2:
        raise NotImplementedError("grid-based ball quadrature is 2-D only")
    if ball.singular_center:
        r_cells = _graded_axis_cells(0.0, ball.radius, decades, panels_per_decade)
    else:
        r_cells = _axis_cells(0.0, ball.radius, max(cross, 16))
    th_cells = _axis_cells(0.0, 2.0 * math.pi, max(cross, 16))
    centers, widths = _tensor_cells([r_cells, th_cells])
    rho, theta = centers[:, 0], centers[:, 1]
    weights = np.prod(widths, axis=1) * rho
    points = np.stack(
        [
            ball.center[0] + rho * np.cos(theta),
            ball.center[1] + rho * np.sin(theta),
        ],
        axis=-1,
    )
    return QuadratureGrid(ball, 0, 0.0, centers, widths, weights, points)


def build_grid(domain: Domain, levels: int, grading: float = 2.0) -> QuadratureGrid:
    """Grid graded toward the singular face, strictly finer with ``levels``.

    For cusp domains and singular-axis boxes the grid resolves
    ``levels * max(grading, 1)`` decades next to the face; with
    ``grading = 0`` a box is subdivided uniformly.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    decades = levels * max(grading, 1.0)
    if isinstance(domain, CuspDomain):
        g = _cusp_reference_grid(domain, decades, 12, cross=4 * 2 ** min(levels, 4))
    elif isinstance(domain, Ball):
        g = _ball_grid(domain, decades, 12, cross=8 * 2 ** min(levels, 3))
    elif isinstance(domain, Box):
        if domain.singular_axis is not None and grading > 0:
            g = _box_grid(domain, 4 * 2 ** min(levels, 5), decades, 12)
        else:
            g = _box_grid(domain, 4 * 2**levels, 0.0, 12)
    else:
        raise TypeError(f"unsupported domain type {type(domain)!r}")
    return QuadratureGrid(
        domain, levels, grading, g.centers, g.widths, g.weights, g.points
    )


# ---------------------------------------------------------------------------
# integral verdicts
# ---------------------------------------------------------------------------


class Verdict(str, Enum):
    FINITE = "finite"
    DIVERGENT = "divergent"
    INCONCLUSIVE = "inconclusive"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class IntegralVerdict:
    """Outcome of adaptive integration with divergence detection.

    ``value`` is meaningful only for a finite verdict; ``trace`` holds the
    successive refinement estimates that justify the verdict.
    """

    value: float
    verdict: Verdict
    trace: tuple[float, ...]

    @property
    def finite(self) -> bool:
        return self.verdict is Verdict.FINITE

    @property
    def divergent(self) -> bool:
        return self.verdict is Verdict.DIVERGENT

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "verdict": self.verdict.value,
            "trace": list(self.trace),
        }


@dataclass(frozen=True)
class RefinementSchedule:
    """Refinement plan for :func:`integrate`.

    The resolved window next to the singular face starts at
    ``start_decades`` decades and multiplies by ``deepen`` each level (capped
    at ``max_decades``), while panel density per decade stays fixed.  The
    super-geometric deepening makes any non-integrable power *or logarithmic*
    singularity inflate successive estimates by at least the divergence
    growth factor once the singular contribution dominates.
    """

    max_levels: int = 9
    start_decades: float = 1.0
    deepen: float = 2.0
    max_decades: float = 256.0
    panels_per_decade: int = 24
    cross_cells: int = 12
    uniform_start: int = 8

    def decades(self, level: int) -> float:
        return min(self.start_decades * self.deepen**level, self.max_decades)

    def cross(self, level: int) -> int:
        return self.cross_cells * 2 ** min(level, 3)

    def uniform(self, level: int) -> int:
        return self.uniform_start * 2 ** min(level, 6)


DEFAULT_SCHEDULE = RefinementSchedule()


def _level_grid(domain: Domain, schedule: RefinementSchedule, level: int) -> QuadratureGrid:
    d = schedule.decades(level)
    ppd = schedule.panels_per_decade
    if isinstance(domain, CuspDomain):
        cross = schedule.cross(level)
        if domain.dim > 2:  # keep tensor cell counts tractable
            cross = min(cross, 24)
        return _cusp_reference_grid(domain, d, ppd, cross)
    if isinstance(domain, Ball):
        return _ball_grid(domain, d, ppd, schedule.cross(level) + 8)
    if isinstance(domain, Box):
        if domain.singular_axis is not None:
            return _box_grid(domain, schedule.cross(level), d, ppd)
        return _box_grid(domain, schedule.uniform(level), 0.0, ppd)
    raise TypeError(f"unsupported domain type {type(domain)!r}")


def fixed_grid_sum(f: Callable[[np.ndarray], np.ndarray], grid: QuadratureGrid) -> float:
    """Quadrature sum of ``f`` on one grid; raises on non-finite interior values."""
    vals = np.asarray(f(grid.points), dtype=float)
    if vals.shape != (grid.cell_count,):
        raise ValueError(
            f"integrand returned shape {vals.shape}, expected ({grid.cell_count},)"
        )
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("integrand returned a non-finite value at an interior node")
    return float(np.dot(vals, grid.weights))


def _agrees(a: float, b: float, tol: float) -> bool:
    scale = max(abs(a), abs(b))
    if scale == 0.0:
        return False  # keep refining; an all-zero trace is resolved at the end
    return abs(a - b) <= tol * scale


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    domain: Domain,
    schedule: RefinementSchedule | None = None,
    tol: float = 1e-3,
    growth: float = 1.5,
) -> IntegralVerdict:
    """Integrate ``f`` over ``domain`` and decide finiteness.

    ``f`` must accept an ``(N, n)`` array of interior points and return
    ``(N,)`` values; singular behavior is allowed only at the boundary or the
    origin.  The verdict is Finite once the last two refinement estimates
    agree to relative ``tol``, Divergent once they grow by at least
    ``growth`` across each of the last two refinements, Inconclusive if the
    schedule runs out first.
    """
    schedule = schedule or DEFAULT_SCHEDULE
    trace: list[float] = []
    prev_signature = None
    for level in range(schedule.max_levels + 1):
        signature = (
            schedule.decades(level),
            schedule.cross(level),
            schedule.uniform(level),
        )
        if signature == prev_signature:
            break  # refinement exhausted; repeating a grid proves nothing
        prev_signature = signature
        grid = _level_grid(domain, schedule, level)
        try:
            trace.append(fixed_grid_sum(f, grid))
        except EvaluationError:
            # overflow at the singular face while the estimates were already
            # inflating is divergence manifesting, not a broken integrand
            if len(trace) >= 2 and abs(trace[-1]) >= growth * abs(trace[-2]) > 0:
                return IntegralVerdict(trace[-1], Verdict.DIVERGENT, tuple(trace))
            raise
        if len(trace) >= 2 and _agrees(trace[-1], trace[-2], tol):
            return IntegralVerdict(trace[-1], Verdict.FINITE, tuple(trace))
        if len(trace) >= 3 and abs(trace[-2]) > 0 and abs(trace[-3]) > 0:
            r_last = abs(trace[-1]) / abs(trace[-2])
            r_prev = abs(trace[-2]) / abs(trace[-3])
            sustained = r_last >= growth and r_prev >= growth
            # barely-finite integrals also inflate early, but their growth
            # ratios slide toward 1 with widening steps; true divergence
            # either keeps accelerating or converges onto the deepening
            # factor with shrinking steps
            trending_up = r_last >= r_prev * (1 - 1e-9)
            converging_high = False
            if len(trace) >= 4 and abs(trace[-4]) > 0:
                r_first = abs(trace[-3]) / abs(trace[-4])
                d_old = r_first - r_prev
                d_new = r_prev - r_last
                converging_high = 0.0 < d_new <= 0.7 * d_old
            if sustained and (trending_up or converging_high):
                return IntegralVerdict(trace[-1], Verdict.DIVERGENT, tuple(trace))
    if all(v == 0.0 for v in trace):
        return IntegralVerdict(0.0, Verdict.FINITE, tuple(trace))
    return IntegralVerdict(trace[-1], Verdict.INCONCLUSIVE, tuple(trace))

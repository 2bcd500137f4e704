"""The explicit cusp homeomorphism, its derivative calculus, quasiisometry
checks, and the two distortion integrals that control composition bounds.

The map sends the Lipschitz reference cusp ``H_1`` onto the power cusp
``H_g`` by scaling each transverse coordinate with the profile raised to a
power ``a`` and bending the axis coordinate to ``x_n**a``:

    (x_1, ..., x_n)  ->  (x_1 g_1(x_n)**a / x_n, ..., x_n**a),  0 < a <= 1.

Its Jacobian has the closed form ``a * x_n**(a-n) * G(x_n)**a`` and its
derivative norm blows up like ``x_n**(a-1)`` toward the tip, which is why the
map is not quasiisometric for ``a < 1`` but still induces bounded composition
operators in the mean-distortion sense.  Both distortion integrals reduce to
1-D integrals of powers of ``x_n``, which are fed to the graded refinement
engine for finite/divergent verdicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from .geometry import (
    CuspDomain,
    IntegralVerdict,
    RefinementSchedule,
    h1_domain,
    integrate,
    unit_interval,
)

__all__ = [
    "CuspMap",
    "DistortionReport",
    "QuasiisometryReport",
    "check_quasiisometry",
    "distortion_Ia",
    "distortion_report",
    "ia_exponent_q_threshold",
    "ja_exponent_s_bound",
    "jacobian_Ja",
]


@dataclass(frozen=True)
class CuspMap:
    """Homeomorphism from the reference cusp ``H_1`` onto a power cusp.

    ``a = 1`` with all profile exponents equal to 1 is the identity.
    """

    target: CuspDomain
    a: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.a <= 1.0):
            raise ValueError("bending exponent a must lie in (0, 1]")

    @property
    def domain(self) -> CuspDomain:
        return self.target

    @property
    def source(self) -> CuspDomain:
        return h1_domain(self.target.dim)

    @property
    def image(self) -> CuspDomain:
        """Exact image: the cusp with the profile constants raised to ``a``
        (coincides with the target for unit-scale profiles)."""
        c1, c2 = self.target.scale_bounds
        return CuspDomain(
            dim=self.target.dim,
            exponents=self.target.exponents,
            scale_bounds=(c1**self.a, c2**self.a),
        )

    @property
    def dim(self) -> int:
        return self.target.dim

    # -- pointwise maps -----------------------------------------------------

    def _check_source(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.dim:
            raise ValueError(f"points have dimension {x.shape[-1]}, expected {self.dim}")
        return x

    def apply(self, x) -> np.ndarray:
        """Map points of ``H_1`` into the target cusp; rejects outside points."""
        single = np.asarray(x).ndim == 1
        pts = self._check_source(x)
        src = self.source
        t = pts[:, -1]
        inside = (t > 0) & (t < 1) & np.all(pts[:, :-1] > 0, axis=1) & np.all(
            pts[:, :-1] < t[:, None], axis=1
        )
        if not np.all(inside):
            raise ValueError("point outside the reference cusp H_1")
        out = np.empty_like(pts)
        out[:, :-1] = pts[:, :-1] * self.target.profiles(t) ** self.a / t[:, None]
        out[:, -1] = t**self.a
        return out[0] if single else out

    def apply_inverse(self, y) -> np.ndarray:
        """Componentwise inverse: ``x_n = y_n**(1/a)``, ``x_i = y_i x_n / g_i(x_n)**a``."""
        single = np.asarray(y).ndim == 1
        pts = self._check_source(y)
        t = pts[:, -1] ** (1.0 / self.a)
        out = np.empty_like(pts)
        out[:, :-1] = pts[:, :-1] * t[:, None] / self.target.profiles(t) ** self.a
        out[:, -1] = t
        return out[0] if single else out

    # -- derivative calculus ------------------------------------------------

    def jacobian(self, x) -> np.ndarray:
        """Closed-form Jacobian determinant ``a * t**(a-n) * G(t)**a``, t = x_n.

        Collapsed to a single power of ``t`` so the identity parameters give
        exactly 1 at every point.
        """
        single = np.asarray(x).ndim == 1
        pts = self._check_source(x)
        t = pts[:, -1]
        if np.any(t <= 0.0):
            raise ZeroDivisionError("Jacobian undefined at x_n = 0")
        n, a = self.dim, self.a
        expo = a - n + a * (self.target.gamma - 1.0)
        scale = self.target.profile_scale ** (a * (n - 1))
        vals = a * scale * t**expo
        return vals[0] if single else vals

    def derivative_matrix(self, x) -> np.ndarray:
        """Explicit n-by-n derivative, nonzero on the diagonal and last column."""
        single = np.asarray(x).ndim == 1
        pts = self._check_source(x)
        t = pts[:, -1]
        if np.any(t <= 0.0):
            raise ZeroDivisionError("derivative undefined at x_n = 0")
        n = self.dim
        a = self.a
        exps = np.asarray(self.target.exponents)
        scale = self.target.profile_scale
        g = scale * t[:, None] ** exps
        dg = scale * exps * t[:, None] ** (exps - 1.0)
        mats = np.zeros((pts.shape[0], n, n))
        idx = np.arange(n - 1)
        mats[:, idx, idx] = g**a / t[:, None]
        mats[:, :-1, -1] = pts[:, :-1] * (
            -(g**a) / t[:, None] ** 2 + a * g ** (a - 1.0) * dg / t[:, None]
        )
        mats[:, -1, -1] = a * t ** (a - 1.0)
        return mats[0] if single else mats

    def derivative_norm(self, x) -> np.ndarray:
        """Operator (spectral) norm of the derivative matrix."""
        single = np.asarray(x).ndim == 1
        mats = self.derivative_matrix(np.atleast_2d(np.asarray(x, dtype=float)))
        norms = np.linalg.norm(mats, ord=2, axis=(1, 2))
        return norms[0] if single else norms

    def derivative_norm_bound_constant(self) -> float:
        """Constant ``c1`` with ``|D(map)(x)| <= c1 * x_n**(a - 1)`` on ``H_1``.

        Frobenius bound assembled from the per-entry envelopes induced by the
        Lipschitz profile bounds ``g_i(t) <= M t`` and ``g_i'(t) <= M``.
        """
        a = self.a
        c2 = self.target.profile_scale
        total = a**2
        for gi in self.target.exponents:
            total += (c2**a) ** 2
            total += ((1.0 + a * gi) * c2**a) ** 2
        return math.sqrt(total)


# ---------------------------------------------------------------------------
# quasiisometry check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuasiisometryReport:
    """Sampled two-sided Lipschitz constant and its trend across scales.

    ``scale_trace`` holds one Q estimate per shrinking band next to the
    singular face; a geometric climb of the trace refutes quasiisometry.
    """

    q_estimate: float
    verdict: str
    scale_trace: tuple[float, ...]
    jacobian_consistent: bool | None = None

    def to_dict(self) -> dict:
        return {
            "q_estimate": self.q_estimate,
            "verdict": self.verdict,
            "scale_trace": list(self.scale_trace),
            "jacobian_consistent": self.jacobian_consistent,
        }


def _sample_h1_band(rng, n: int, t_lo: float, t_hi: float, count: int) -> np.ndarray:
    t = rng.uniform(t_lo, min(t_hi, 0.99), size=count)
    u = rng.uniform(0.05, 0.95, size=(count, n - 1))
    pts = np.empty((count, n))
    pts[:, :-1] = u * t[:, None]
    pts[:, -1] = t
    return pts


def check_quasiisometry(
    mapping,
    scales: int = 5,
    pairs: int = 256,
    seed: int = 0,
    growth: float = 1.5,
    dim: int | None = None,
) -> QuasiisometryReport:
    """Estimate difference quotients of a map of ``H_1`` on shrinking bands.

    ``mapping`` needs a vectorized ``apply`` (and ``dim``, unless passed
    explicitly); ``jacobian`` is used when available to cross-check
    ``Q**-n <= |J| <= Q**n``.  Bands are ``x_n in (4**-(k+1), 4**-k)``;
    verdict is ``violated`` when the per-band Q estimates climb by the
    growth factor across the last two bands, ``satisfied`` when the whole
    trace stays within one growth factor.
    """
    apply = mapping.apply if hasattr(mapping, "apply") else mapping
    n = dim if dim is not None else mapping.dim
    rng = np.random.default_rng(seed)
    trace = []
    for k in range(scales):
        t_hi = 4.0**-k
        t_lo = 4.0 ** -(k + 1)
        x = _sample_h1_band(rng, n, t_lo, t_hi, pairs)
        step = 1e-4 * t_lo
        direction = rng.normal(size=(pairs, n))
        direction /= np.linalg.norm(direction, axis=1)[:, None]
        z = x + step * direction
        # nudge pairs back inside the open cusp
        z[:, -1] = np.clip(z[:, -1], t_lo * (1 + 1e-9), 1.0 - 1e-9)
        z[:, :-1] = np.clip(z[:, :-1], 1e-12, z[:, -1][:, None] * (1 - 1e-9))
        quot = np.linalg.norm(apply(z) - apply(x), axis=-1) / np.linalg.norm(
            z - x, axis=-1
        )
        q_band = max(float(np.max(quot)), 1.0 / float(np.min(quot)))
        trace.append(q_band)
    verdict = "inconclusive"
    if (
        len(trace) >= 3
        and trace[-1] >= growth * trace[-2]
        and trace[-2] >= growth * trace[-3]
    ):
        verdict = "violated"
    elif max(trace) <= growth * min(trace):
        verdict = "satisfied"
    q = float(max(trace))
    jac_ok = None
    if hasattr(mapping, "jacobian") and verdict == "satisfied":
        x = _sample_h1_band(rng, n, 0.05, 0.95, pairs)
        jac = np.abs(mapping.jacobian(x))
        jac_ok = bool(
            np.all(jac <= q**n * (1 + 1e-6)) and np.all(jac >= q**-n * (1 - 1e-6))
        )
    return QuasiisometryReport(q, verdict, tuple(trace), jac_ok)


# ---------------------------------------------------------------------------
# distortion integrals
# ---------------------------------------------------------------------------


def ia_exponent_q_threshold(n: int, p: float, alpha: float, gamma: float, a: float) -> float:
    """q below which the mean-distortion integral is finite:
    ``n p / (a (alpha + gamma) + p - a p)``."""
    return n * p / (a * (alpha + gamma) + p - a * p)


def ja_exponent_s_bound(n: int, r: float, alpha: float, gamma: float, a: float) -> float:
    """s below which the weighted-Jacobian integral is finite:
    ``a (alpha + gamma) r / n``."""
    return a * (alpha + gamma) * r / n


def distortion_Ia(
    p: float,
    q: float,
    a: float,
    alpha: float,
    domain: CuspDomain,
    schedule: RefinementSchedule | None = None,
    tol: float = 1e-3,
    growth: float = 1.5,
) -> IntegralVerdict:
    """Verdict for the reduced mean-distortion integral of the cusp map.

    The n-dimensional integrand collapses along cross-sections to
    ``t**((p(a-1) - a(alpha+1) + n) q/(p-q) + n - 1) * G(t)**(-a q/(p-q))``
    on ``(0, 1)``.
    """
    if not (1.0 <= q < p):
        raise ValueError("need 1 <= q < p")
    if not (0.0 < a <= 1.0):
        raise ValueError("need 0 < a <= 1")
    n = domain.dim
    qq = q / (p - q)
    expo = (p * (a - 1.0) - a * (alpha + 1.0) + n) * qq + n - 1.0

    def f(pts: np.ndarray) -> np.ndarray:
        t = pts[:, 0]
        return t**expo * domain.cross_section(t) ** (-a * qq)

    return integrate(f, unit_interval(), schedule=schedule, tol=tol, growth=growth)


def jacobian_Ja(
    r: float,
    s: float,
    a: float,
    alpha: float,
    domain: CuspDomain,
    schedule: RefinementSchedule | None = None,
    tol: float = 1e-3,
    growth: float = 1.5,
) -> IntegralVerdict:
    """Verdict for the reduced weighted-Jacobian integral
    ``t**((a(alpha+1) - n) r/(r-s) + n - 1) * G(t)**(a r/(r-s))`` on ``(0, 1)``."""
    if not (s < r):
        raise ValueError("need s < r")
    if not (0.0 < a <= 1.0):
        raise ValueError("need 0 < a <= 1")
    n = domain.dim
    rr = r / (r - s)
    expo = (a * (alpha + 1.0) - n) * rr + n - 1.0

    def f(pts: np.ndarray) -> np.ndarray:
        t = pts[:, 0]
        return t**expo * domain.cross_section(t) ** (a * rr)

    return integrate(f, unit_interval(), schedule=schedule, tol=tol, growth=growth)


@dataclass(frozen=True)
class DistortionReport:
    """Verdicts for both distortion integrals plus the analytic thresholds."""

    p: float
    q: float
    r: float
    s: float
    alpha: float
    a: float
    Ia: IntegralVerdict
    Ja: IntegralVerdict
    q_threshold: float
    s_bound: float

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "r": self.r,
            "s": self.s,
            "alpha": self.alpha,
            "a": self.a,
            "Ia": self.Ia.to_dict(),
            "Ja": self.Ja.to_dict(),
            "q_threshold": self.q_threshold,
            "s_bound": self.s_bound,
        }


def distortion_report(
    p: float,
    q: float,
    r: float,
    s: float,
    a: float,
    alpha: float,
    domain: CuspDomain,
    schedule: RefinementSchedule | None = None,
) -> DistortionReport:
    """Run both distortion integrals for one exponent tuple."""
    n = domain.dim
    gamma = domain.gamma
    return DistortionReport(
        p=p,
        q=q,
        r=r,
        s=s,
        alpha=alpha,
        a=a,
        Ia=distortion_Ia(p, q, a, alpha, domain, schedule=schedule),
        Ja=jacobian_Ja(r, s, a, alpha, domain, schedule=schedule),
        q_threshold=ia_exponent_q_threshold(n, p, alpha, gamma, a),
        s_bound=ja_exponent_s_bound(n, r, alpha, gamma, a),
    )

"""Weighted P1 finite elements for the degenerate Dirichlet problem
``div(w grad u) = f`` with zero boundary values.

Sign convention: testing the divergence form against a hat function and
integrating by parts gives ``∫ w grad(u) . grad(phi) dx = -∫ f phi dx``, so
the assembled stiffness matrix is solved against the negated load vector.
The weight is sampled at the three edge midpoints of each triangle; pinning
the weight's singular point to a mesh vertex keeps every sample point away
from it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla
import sympy as sp

from .geometry import Box, CuspDomain
from .weights import Weight

__all__ = [
    "AssembledSystem",
    "ConvergenceRate",
    "CuspSection",
    "FemSolution",
    "Mesh",
    "SolverError",
    "assemble",
    "convergence_rate",
    "energy_norm_error",
    "l2_error",
    "manufactured_rhs",
    "read_mesh",
    "solve_dirichlet",
    "triangulate",
    "weak_residual",
    "write_mesh",
]


class SolverError(RuntimeError):
    """Iterative solve failed to converge within its iteration cap."""


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation: vertices, positively oriented triangles,
    and per-vertex boundary flags."""

    vertices: np.ndarray  # (N, 2)
    triangles: np.ndarray  # (M, 3) int
    boundary: np.ndarray  # (N,) bool

    @property
    def h(self) -> float:
        """Longest edge."""
        p = self.vertices[self.triangles]
        e = np.concatenate(
            [p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=0
        )
        return float(np.max(np.linalg.norm(e, axis=1)))

    @property
    def min_edge(self) -> float:
        p = self.vertices[self.triangles]
        e = np.concatenate(
            [p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=0
        )
        return float(np.min(np.linalg.norm(e, axis=1)))

    @property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    def edge_midpoints(self) -> np.ndarray:
        """(M, 3, 2) midpoints of the three edges of every triangle."""
        p = self.vertices[self.triangles]
        return 0.5 * np.stack(
            [p[:, 0] + p[:, 1], p[:, 1] + p[:, 2], p[:, 2] + p[:, 0]], axis=1
        )


@dataclass(frozen=True)
class CuspSection:
    """Polygonal truncation of a 2-D power cusp at ``x_n = eps``."""

    domain: CuspDomain
    eps: float = 1e-3

    def __post_init__(self):
        if self.domain.dim != 2:
            raise ValueError("cusp sections are meshed in 2-D only")
        if not (0.0 < self.eps < 1.0):
            raise ValueError("truncation height must lie in (0, 1)")


def _structured_nodes(n: int, grade: float | None) -> np.ndarray:
    s = np.linspace(0.0, 1.0, n + 1)
    if grade is not None and grade > 1.0:
        s = s**grade
    return s


def triangulate(
    region: Box | CuspSection,
    h: float,
    grade_exponent: float | None = None,
) -> Mesh:
    """Structured triangulation with max edge below ``h``.

    ``grade_exponent > 1`` concentrates vertices toward the origin corner
    (boxes) or the truncation face (cusp sections).  Boxes must be 2-D.
    """
    if h <= 0:
        raise ValueError("mesh size must be positive")
    if isinstance(region, Box):
        if region.dim != 2:
            raise ValueError("triangulation is 2-D only")
        lo = np.asarray(region.lo)
        hi = np.asarray(region.hi)
        ext = hi - lo
        nx = max(2, int(math.ceil(ext[0] / h * math.sqrt(2.0))))
        ny = max(2, int(math.ceil(ext[1] / h * math.sqrt(2.0))))
        sx = lo[0] + ext[0] * _structured_nodes(nx, grade_exponent)
        sy = lo[1] + ext[1] * _structured_nodes(ny, grade_exponent)
        xx, yy = np.meshgrid(sx, sy, indexing="ij")
        verts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
        on_bnd = (
            (xx == sx[0])
            | (xx == sx[-1])
            | (yy == sy[0])
            | (yy == sy[-1])
        ).ravel()
    elif isinstance(region, CuspSection):
        dom = region.domain
        nt = max(2, int(math.ceil((1.0 - region.eps) / h * math.sqrt(2.0))))
        nu = max(2, int(math.ceil(1.0 / h)))
        st = np.linspace(0.0, 1.0, nt + 1)
        if grade_exponent is not None and grade_exponent > 1.0:
            st = st**grade_exponent
        t = region.eps + (1.0 - region.eps) * st
        u = np.linspace(0.0, 1.0, nu + 1)
        uu, tt = np.meshgrid(u, t, indexing="ij")
        g = dom.profiles(tt.ravel())[:, 0].reshape(tt.shape)
        verts = np.stack([(uu * g).ravel(), tt.ravel()], axis=-1)
        on_bnd = (
            (uu == 0.0) | (uu == 1.0) | (tt == t[0]) | (tt == t[-1])
        ).ravel()
        nx, ny = nu, nt
    else:
        raise TypeError(f"cannot triangulate {type(region)!r}")

    def vid(i: int, j: int) -> int:
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    triangles = np.asarray(tris, dtype=np.int64)
    mesh = Mesh(vertices=verts, triangles=triangles, boundary=on_bnd)
    areas = mesh.areas
    if np.any(areas <= 0):
        flip = areas <= 0
        triangles[flip] = triangles[flip][:, ::-1]
        mesh = Mesh(vertices=verts, triangles=triangles, boundary=on_bnd)
    return mesh


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssembledSystem:
    """Interior stiffness/load pair with the index map back to vertices.

    ``load[i] = ∫ f phi_i`` exactly as written in the divergence form; the
    Galerkin right-hand side of the Dirichlet problem is ``-load``.
    """

    mesh: Mesh
    stiffness: sparse.csr_matrix
    load: np.ndarray
    interior: np.ndarray


def _p1_gradients(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    p = mesh.vertices[mesh.triangles]
    areas = mesh.areas
    grads = np.empty((len(mesh.triangles), 3, 2))
    for k in range(3):
        opp1 = p[:, (k + 1) % 3]
        opp2 = p[:, (k + 2) % 3]
        grads[:, k, 0] = opp1[:, 1] - opp2[:, 1]
        grads[:, k, 1] = opp2[:, 0] - opp1[:, 0]
    grads /= (2.0 * areas)[:, None, None]
    return grads, areas


def assemble(
    mesh: Mesh,
    w: Weight | Callable[[np.ndarray], np.ndarray] | float,
    f: Callable[[np.ndarray], np.ndarray] | float,
) -> AssembledSystem:
    """Weighted stiffness ``∫ w grad(phi_i),grad(phi_j)`` and load ``∫ f phi_i``.

    The weight is averaged per triangle from the three edge midpoints (exact
    for quadratics); assembly fails if a midpoint sample is not positive.
    """
    mids = mesh.edge_midpoints()
    flat = mids.reshape(-1, 2)
    if isinstance(w, (int, float)):
        wvals = np.full(flat.shape[0], float(w))
    else:
        wvals = np.asarray(w(flat), dtype=float)
    wvals = wvals.reshape(-1, 3)
    if not np.all(np.isfinite(wvals)) or np.any(wvals <= 0.0):
        raise ValueError("weight must be positive and finite at quadrature nodes")
    wbar = wvals.mean(axis=1)

    if isinstance(f, (int, float)):
        fvals = np.full(flat.shape[0], float(f)).reshape(-1, 3)
    else:
        fvals = np.asarray(f(flat), dtype=float).reshape(-1, 3)

    grads, areas = _p1_gradients(mesh)
    local = np.einsum("tkd,tld->tkl", grads, grads) * (areas * wbar)[:, None, None]
    # midpoints: m_0=(v0+v1)/2, m_1=(v1+v2)/2, m_2=(v2+v0)/2; the hat of
    # vertex k is 1/2 on midpoints k and (k-1)%3 and zero on the third
    local_load = np.zeros((len(mesh.triangles), 3))
    for k in range(3):
        local_load[:, k] = (
            (fvals[:, k] + fvals[:, (k - 1) % 3]) * 0.5 * (areas / 3.0)
        )

    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    K_full = sparse.coo_matrix(
        (local.ravel(), (rows, cols)),
        shape=(len(mesh.vertices), len(mesh.vertices)),
    ).tocsr()
    load_full = np.zeros(len(mesh.vertices))
    np.add.at(load_full, mesh.triangles.ravel(), local_load.ravel())

    interior = mesh.interior
    K = K_full[interior][:, interior].tocsr()
    return AssembledSystem(mesh, K, load_full[interior], interior)


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FemSolution:
    """Discrete solution with zero boundary values, solver residual, and
    weighted Dirichlet energy ``u^T K u``."""

    mesh: Mesh
    values: np.ndarray
    residual: float
    energy: float


def solve_dirichlet(
    mesh: Mesh,
    w,
    f,
    tol: float = 1e-10,
    region=None,
) -> FemSolution:
    """Conjugate-gradient solve of the weighted Dirichlet problem.

    Jacobi-preconditioned CG on the SPD interior system down to relative
    residual ``tol``, iteration cap ten times the unknown count.  Passing
    the continuous ``region`` triggers the solvability check
    ``∫ w**(-n/2) < inf``; failure warns but does not abort.
    """
    if region is not None and isinstance(w, Weight):
        from .weights import theorem10_condition

        cond = theorem10_condition(w, region)
        if not cond.finite:
            warnings.warn(
                "solvability hypothesis violated: integral of w**(-n/2) over the"
                f" region is {cond.verdict.value}",
                stacklevel=2,
            )
    system = assemble(mesh, w, f)
    K = system.stiffness
    rhs = -system.load
    n = K.shape[0]
    if not np.any(rhs):
        values = np.zeros(len(mesh.vertices))
        return FemSolution(mesh, values, 0.0, 0.0)
    diag = K.diagonal()
    M = sparse.diags(1.0 / diag)
    x, info = spla.cg(K, rhs, rtol=tol, atol=0.0, maxiter=10 * n, M=M)
    if info != 0:
        raise SolverError(
            f"conjugate gradient stopped after {info} iterations without reaching"
            f" relative residual {tol:g} on {n} unknowns"
        )
    res = float(np.linalg.norm(K @ x - rhs) / np.linalg.norm(rhs))
    values = np.zeros(len(mesh.vertices))
    values[system.interior] = x
    energy = float(x @ (K @ x))
    return FemSolution(mesh, values, res, energy)


def weak_residual(
    solution: FemSolution,
    w,
    f,
    test_subset: Sequence[int] | None = None,
) -> float:
    """Residual of the weak form over interior hat functions.

    Computes ``max_i |<u, phi_i>_w + F(phi_i)|`` over the tested hats,
    normalized by the 2-norm scale of both sides (the same scale the
    iterative solver promises its relative residual against).
    """
    system = assemble(solution.mesh, w, f)
    u = solution.values[system.interior]
    lhs = system.stiffness @ u
    rhs = -system.load
    res = lhs - rhs
    if test_subset is not None:
        mask = np.zeros(len(res), dtype=bool)
        idx_map = {v: i for i, v in enumerate(system.interior)}
        for v in test_subset:
            mask[idx_map[int(v)]] = True
        res = res[mask]
    scale = max(float(np.linalg.norm(lhs)), float(np.linalg.norm(rhs)), 1e-300)
    return float(np.max(np.abs(res)) / scale)


# ---------------------------------------------------------------------------
# errors, rates, manufactured solutions
# ---------------------------------------------------------------------------


def _midpoint_values(mesh: Mesh, vertex_values: np.ndarray) -> np.ndarray:
    tri_vals = vertex_values[mesh.triangles]
    return 0.5 * np.stack(
        [
            tri_vals[:, 0] + tri_vals[:, 1],
            tri_vals[:, 1] + tri_vals[:, 2],
            tri_vals[:, 2] + tri_vals[:, 0],
        ],
        axis=1,
    )


def l2_error(solution: FemSolution, exact: Callable[[np.ndarray], np.ndarray]) -> float:
    """L2 distance to a reference field by the mid-edge rule (exact for P2)."""
    mesh = solution.mesh
    mids = mesh.edge_midpoints()
    uh = _midpoint_values(mesh, solution.values)
    ue = np.asarray(exact(mids.reshape(-1, 2)), dtype=float).reshape(-1, 3)
    err2 = np.sum((uh - ue) ** 2, axis=1) * mesh.areas / 3.0
    return float(math.sqrt(np.sum(err2)))


def energy_norm_error(
    solution: FemSolution,
    exact_grad: Callable[[np.ndarray], np.ndarray],
    w=1.0,
) -> float:
    """Weighted H1-seminorm distance using the element-constant gradient."""
    mesh = solution.mesh
    grads, areas = _p1_gradients(mesh)
    gh = np.einsum("tk,tkd->td", solution.values[mesh.triangles], grads)
    mids = mesh.edge_midpoints()
    ge = np.asarray(exact_grad(mids.reshape(-1, 2)), dtype=float).reshape(-1, 3, 2)
    if isinstance(w, (int, float)):
        wv = np.full(mids.reshape(-1, 2).shape[0], float(w)).reshape(-1, 3)
    else:
        wv = np.asarray(w(mids.reshape(-1, 2)), dtype=float).reshape(-1, 3)
    diff2 = np.sum((ge - gh[:, None, :]) ** 2, axis=2)
    return float(math.sqrt(np.sum(np.mean(diff2 * wv, axis=1) * areas)))


@dataclass(frozen=True)
class ConvergenceRate:
    """Observed orders from an error sequence at h, h/2, h/4, ..."""

    orders: tuple[float, ...]
    estimate: float | None
    inconclusive: bool

    def to_dict(self) -> dict:
        return {
            "orders": list(self.orders),
            "estimate": self.estimate,
            "inconclusive": self.inconclusive,
        }


def convergence_rate(errors: Sequence[float]) -> ConvergenceRate:
    """log2 ratios of successive errors; Inconclusive when non-monotone."""
    errors = [float(e) for e in errors]
    if len(errors) < 2:
        raise ValueError("need at least two error levels")
    if any(e <= 0 for e in errors) or any(
        errors[i + 1] >= errors[i] for i in range(len(errors) - 1)
    ):
        return ConvergenceRate((), None, True)
    orders = tuple(
        math.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1)
    )
    return ConvergenceRate(orders, orders[-1], False)


def manufactured_rhs(u_text: str, w_text: str) -> tuple[Callable, Callable, Callable]:
    """Symbolic oracle: from ``u`` and ``w`` build ``f = div(w grad u)``.

    Returns vectorized ``(u, grad_u, f)``; expressions use variables
    ``x`` and ``y``.
    """
    x, y = sp.symbols("x y")
    loc = {"x": x, "y": y}
    u = sp.sympify(u_text, locals=loc)
    w = sp.sympify(w_text, locals=loc)
    ux, uy = sp.diff(u, x), sp.diff(u, y)
    fexpr = sp.diff(w * ux, x) + sp.diff(w * uy, y)
    u_fn = sp.lambdify((x, y), u, "numpy")
    gx_fn = sp.lambdify((x, y), ux, "numpy")
    gy_fn = sp.lambdify((x, y), uy, "numpy")
    f_fn = sp.lambdify((x, y), sp.simplify(fexpr), "numpy")

    def u_vec(pts):
        pts = np.atleast_2d(pts)
        return np.broadcast_to(
            np.asarray(u_fn(pts[:, 0], pts[:, 1]), dtype=float), (pts.shape[0],)
        ).copy()

    def grad_vec(pts):
        pts = np.atleast_2d(pts)
        gx = np.broadcast_to(
            np.asarray(gx_fn(pts[:, 0], pts[:, 1]), dtype=float), (pts.shape[0],)
        )
        gy = np.broadcast_to(
            np.asarray(gy_fn(pts[:, 0], pts[:, 1]), dtype=float), (pts.shape[0],)
        )
        return np.stack([gx, gy], axis=-1)

    def f_vec(pts):
        pts = np.atleast_2d(pts)
        return np.broadcast_to(
            np.asarray(f_fn(pts[:, 0], pts[:, 1]), dtype=float), (pts.shape[0],)
        ).copy()

    return u_vec, grad_vec, f_vec


# ---------------------------------------------------------------------------
# mesh I/O and solution export
# ---------------------------------------------------------------------------


def write_mesh(mesh: Mesh, path) -> None:
    """Plain text: header, then ``v x y flag`` lines, then ``t i j k`` lines."""
    with open(path, "w") as fh:
        fh.write(f"mesh {len(mesh.vertices)} {len(mesh.triangles)}\n")
        for (x, y), b in zip(mesh.vertices, mesh.boundary):
            fh.write(f"v {float(x)!r} {float(y)!r} {int(b)}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"t {i} {j} {k}\n")


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        header = fh.readline().split()
        if not header or header[0] != "mesh":
            raise ValueError("not a mesh file")
        nv, nt = int(header[1]), int(header[2])
        verts = np.empty((nv, 2))
        flags = np.empty(nv, dtype=bool)
        for i in range(nv):
            tok = fh.readline().split()
            verts[i] = (float(tok[1]), float(tok[2]))
            flags[i] = bool(int(tok[3]))
        tris = np.empty((nt, 3), dtype=np.int64)
        for i in range(nt):
            tok = fh.readline().split()
            tris[i] = (int(tok[1]), int(tok[2]), int(tok[3]))
    return Mesh(verts, tris, flags)

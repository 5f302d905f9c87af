"""Two-point boundary-value solver.

Three-stage Lobatto IIIA collocation (fourth order, the C1 cubic
"Hermite-Simpson" scheme) solved by damped Newton on a sparse global
system, with bisection of every subinterval whose scaled collocation
residual exceeds the tolerance.

Vectorized conventions: ``rhs(x, Y)`` takes abscissae of shape ``(m,)`` and
states of shape ``(n, m)`` and returns ``(n, m)``; ``rhs_jacobian`` returns
``(n, n, m)``.  ``bc(ya, yb)`` returns ``(n,)`` and ``bc_jacobians`` returns
the pair ``(dbc/dya, dbc/dyb)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

EPS = np.finfo(float).eps


class BvpError(RuntimeError):
    """Base class for solver failures; callers retry with a smaller continuation step."""


class NewtonDiverged(BvpError):
    pass


class MeshBudgetExceeded(BvpError):
    pass


class OutOfRange(ValueError):
    pass


@dataclass
class BvpProblem:
    n: int
    rhs: Callable
    bc: Callable
    rhs_jacobian: Optional[Callable] = None
    bc_jacobians: Optional[Callable] = None


@dataclass(frozen=True)
class SolverSettings:
    residual_tolerance: float = 1e-8
    newton_max_iterations: int = 50
    damping_factor: float = 0.5
    min_damping: float = 2.0**-14
    max_mesh_points: int = 20000
    max_refinements: int = 40

    def __post_init__(self):
        for name in ("residual_tolerance", "newton_max_iterations", "damping_factor",
                     "min_damping", "max_mesh_points", "max_refinements"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Mesh:
    """Nodes, nodal values ``(n, m)`` and, once solved, nodal slopes ``f(x, y)``."""

    nodes: np.ndarray
    values: np.ndarray
    slopes: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if nodes.ndim != 1 or values.shape[1] != nodes.size:
            raise ValueError("values must have shape (n, len(nodes))")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("mesh nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def size(self) -> int:
        return self.nodes.size

    def __call__(self, x):
        return evaluate(self, x)


def _fd_rhs_jacobian(rhs, x, Y, f0):
    n, m = Y.shape
    J = np.empty((n, n, m))
    for j in range(n):
        h = np.sqrt(EPS) * np.maximum(1.0, np.abs(Y[j]))
        Yp = Y.copy()
        Yp[j] += h
        J[:, j, :] = (rhs(x, Yp) - f0) / h
    return J


def fd_bc_jacobians(bc, ya, yb):
    """Forward-difference Jacobians of a boundary-condition function."""
    r0 = np.asarray(bc(ya, yb), dtype=float)
    n = ya.size
    Ja = np.empty((r0.size, n))
    Jb = np.empty((r0.size, n))
    for j in range(n):
        h = np.sqrt(EPS) * max(1.0, abs(ya[j]))
        e = np.zeros(n)
        e[j] = h
        Ja[:, j] = (np.asarray(bc(ya + e, yb)) - r0) / h
        h = np.sqrt(EPS) * max(1.0, abs(yb[j]))
        e = np.zeros(n)
        e[j] = h
        Jb[:, j] = (np.asarray(bc(ya, yb + e)) - r0) / h
    return Ja, Jb


class _Collocation:
    """Residual and sparse Jacobian of the collocation system on a fixed mesh."""

    def __init__(self, problem: BvpProblem, x: np.ndarray):
        self.p = problem
        self.x = x
        self.h = np.diff(x)
        self.xmid = x[:-1] + 0.5 * self.h
        n, m = problem.n, x.size
        self.n, self.m = n, m
        # sparsity pattern, fixed for the mesh
        rows, cols = [], []
        for i in range(m - 1):
            r = np.arange(i * n, (i + 1) * n)
            c0 = np.arange(i * n, (i + 1) * n)
            c1 = c0 + n
            rows.append(np.repeat(r, n))
            cols.append(np.tile(c0, n))
            rows.append(np.repeat(r, n))
            cols.append(np.tile(c1, n))
        rb = np.arange((m - 1) * n, m * n)
        rows.append(np.repeat(rb, n))
        cols.append(np.tile(np.arange(n), n))
        rows.append(np.repeat(rb, n))
        cols.append(np.tile(np.arange((m - 1) * n, m * n), n))
        self.rows = np.concatenate(rows)
        self.cols = np.concatenate(cols)

    def _rhs_jac(self, x, Y, f):
        if self.p.rhs_jacobian is not None:
            return np.asarray(self.p.rhs_jacobian(x, Y), dtype=float)
        return _fd_rhs_jacobian(self.p.rhs, x, Y, f)

    def residual(self, Y):
        p, h = self.p, self.h
        f = p.rhs(self.x, Y)
        ymid = 0.5 * (Y[:, 1:] + Y[:, :-1]) - 0.125 * h * (f[:, 1:] - f[:, :-1])
        fmid = p.rhs(self.xmid, ymid)
        col = Y[:, 1:] - Y[:, :-1] - h / 6.0 * (f[:, :-1] + 4.0 * fmid + f[:, 1:])
        bc = np.asarray(p.bc(Y[:, 0], Y[:, -1]), dtype=float)
        return np.concatenate([col.T.ravel(), bc]), (f, ymid, fmid)

    def jacobian(self, Y, cache):
        p, h, n = self.p, self.h, self.n
        f, ymid, fmid = cache
        J = self._rhs_jac(self.x, Y, f)
        Jm = self._rhs_jac(self.xmid, ymid, fmid)
        eye = np.eye(n)[:, :, None]
        # blocks stored as (m-1, n, n)
        Ji = np.moveaxis(J[:, :, :-1], 2, 0)
        Jn = np.moveaxis(J[:, :, 1:], 2, 0)
        Jmid = np.moveaxis(Jm, 2, 0)
        hh = h[:, None, None]
        I = np.moveaxis(eye, 2, 0)
        A = -I - hh / 6.0 * (Ji + 4.0 * Jmid @ (0.5 * I + 0.125 * hh * Ji))
        C = I - hh / 6.0 * (Jn + 4.0 * Jmid @ (0.5 * I - 0.125 * hh * Jn))
        if p.bc_jacobians is not None:
            Ba, Bb = p.bc_jacobians(Y[:, 0], Y[:, -1])
        else:
            Ba, Bb = fd_bc_jacobians(p.bc, Y[:, 0], Y[:, -1])
        data = np.concatenate([
            np.stack([A.reshape(-1, n * n), C.reshape(-1, n * n)], axis=1).ravel(),
            np.asarray(Ba, dtype=float).ravel(),
            np.asarray(Bb, dtype=float).ravel(),
        ])
        N = n * self.m
        return sparse.csc_matrix((data, (self.rows, self.cols)), shape=(N, N))


def _newton(col: _Collocation, Y: np.ndarray, settings: SolverSettings):
    """Damped Newton on a fixed mesh.

    Steps are accepted only if the residual norm measured in the metric of
    the current Newton matrix, ``|J_k^{-1} F|``, decreases (affine-invariant
    monotonicity test).  Returns the converged values, the iteration count
    and, per accepted step, the pair (monitor before, monitor after).
    """
    n, m = Y.shape
    F, cache = col.residual(Y)
    step_tol = max(1e-3 * settings.residual_tolerance, 1e2 * EPS)
    sigma = 1e-4
    monitor = []
    for it in range(settings.newton_max_iterations):
        if not np.all(np.isfinite(F)):
            raise NewtonDiverged("non-finite residual")
        Jac = col.jacobian(Y, cache)
        try:
            lu = splu(Jac)
        except RuntimeError as exc:
            raise NewtonDiverged(f"singular Jacobian: {exc}") from exc
        step = lu.solve(-F)
        if not np.all(np.isfinite(step)):
            raise NewtonDiverged("singular Jacobian")
        norm0 = np.linalg.norm(step)
        step = step.reshape(m, n).T
        small = np.max(np.abs(step) / (1.0 + np.abs(Y))) <= step_tol
        if small:
            Y = Y + step
            return Y, it + 1, monitor
        alpha = 1.0
        while True:
            Ynew = Y + alpha * step
            try:
                Fnew, cnew = col.residual(Ynew)
                normnew = np.linalg.norm(lu.solve(Fnew)) if np.all(np.isfinite(Fnew)) else np.inf
            except ArithmeticError:
                # trial point outside the problem's domain of definition
                normnew = np.inf
            if normnew <= (1.0 - sigma * alpha) * norm0:
                break
            alpha *= settings.damping_factor
            if alpha < settings.min_damping:
                raise NewtonDiverged(
                    f"damping exhausted at iteration {it} (|J^-1 F| = {norm0:.3e})"
                )
        monitor.append((float(norm0), float(normnew)))
        Y, F, cache = Ynew, Fnew, cnew
    raise NewtonDiverged(f"no convergence in {settings.newton_max_iterations} iterations")


_LOBATTO = 0.5 + np.array([-1.0, 1.0]) * np.sqrt(21.0) / 14.0


def _hermite(x0, h, y0, y1, f0, f1, t):
    t2, t3 = t * t, t * t * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def _hermite_deriv(h, y0, y1, f0, f1, t):
    t2 = t * t
    d00 = (6 * t2 - 6 * t) / h
    d10 = 3 * t2 - 4 * t + 1
    d01 = (-6 * t2 + 6 * t) / h
    d11 = 3 * t2 - 2 * t
    return d00 * y0 + d10 * f0 + d01 * y1 + d11 * f1


def collocation_residuals(problem: BvpProblem, x, Y, f=None):
    """Scaled residual ``|S' - f(x, S)| / (1 + |f|)`` per subinterval (max over Lobatto points)."""
    if f is None:
        f = problem.rhs(x, Y)
    h = np.diff(x)
    worst = np.zeros(h.size)
    for t in _LOBATTO:
        xt = x[:-1] + t * h
        S = _hermite(x[:-1], h, Y[:, :-1], Y[:, 1:], f[:, :-1], f[:, 1:], t)
        dS = _hermite_deriv(h, Y[:, :-1], Y[:, 1:], f[:, :-1], f[:, 1:], t)
        ft = problem.rhs(xt, S)
        r = np.max(np.abs(dS - ft) / (1.0 + np.abs(ft)), axis=0)
        worst = np.maximum(worst, r)
    return worst


def solve(problem: BvpProblem, initial: Mesh, settings: SolverSettings = SolverSettings()) -> Mesh:
    """Solve the BVP starting from ``initial``; raises NewtonDiverged or MeshBudgetExceeded."""
    if initial.size < 10:
        raise ValueError("initial mesh needs at least 10 nodes")
    if initial.n != problem.n:
        raise ValueError(f"mesh dimension {initial.n} != problem dimension {problem.n}")
    x = initial.nodes.copy()
    Y = initial.values.copy()
    tol = settings.residual_tolerance
    total_newton = 0
    for refinement in range(settings.max_refinements + 1):
        col = _Collocation(problem, x)
        Y, its, _ = _newton(col, Y, settings)
        total_newton += its
        f = problem.rhs(x, Y)
        res = collocation_residuals(problem, x, Y, f)
        bc_res = np.max(np.abs(problem.bc(Y[:, 0], Y[:, -1])))
        bad = res > tol
        if not bad.any() and bc_res <= tol:
            info = dict(max_residual=float(res.max()), bc_residual=float(bc_res),
                        newton_iterations=total_newton, refinements=refinement)
            return Mesh(x, Y, f, info)
        if not bad.any():
            raise NewtonDiverged(f"boundary residual {bc_res:.3e} stuck above tolerance")
        if x.size + int(bad.sum()) > settings.max_mesh_points:
            raise MeshBudgetExceeded(
                f"refinement needs {x.size + int(bad.sum())} > {settings.max_mesh_points} nodes"
            )
        cur = Mesh(x, Y, f)
        xnew = np.sort(np.concatenate([x, 0.5 * (x[:-1] + x[1:])[bad]]))
        Y = evaluate(cur, xnew)
        x = xnew
    raise MeshBudgetExceeded(f"residual above tolerance after {settings.max_refinements} refinements")


def evaluate(solution: Mesh, x):
    """Cubic Hermite interpolant of a solved mesh (linear if no slopes); exact at nodes."""
    nodes = solution.nodes
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < nodes[0]) or np.any(xs > nodes[-1]):
        raise OutOfRange(f"x outside [{nodes[0]}, {nodes[-1]}]")
    Y = solution.values
    idx = np.clip(np.searchsorted(nodes, xs, side="right") - 1, 0, nodes.size - 2)
    h = nodes[idx + 1] - nodes[idx]
    t = (xs - nodes[idx]) / h
    if solution.slopes is None:
        out = (1 - t) * Y[:, idx] + t * Y[:, idx + 1]
    else:
        out = _hermite(nodes[idx], h, Y[:, idx], Y[:, idx + 1],
                       solution.slopes[:, idx], solution.slopes[:, idx + 1], t)
    exact = nodes[idx] == xs
    out[:, exact] = Y[:, idx[exact]]
    last = xs == nodes[-1]
    out[:, last] = Y[:, -1:]
    return out[:, 0] if scalar else out


def mesh_to_csv(mesh: Mesh, path, names=None) -> None:
    names = list(names) if names else [f"Y{i + 1}" for i in range(mesh.n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", *names])
        for j in range(mesh.size):
            w.writerow([repr(float(mesh.nodes[j]))] + [repr(float(v)) for v in mesh.values[:, j]])


def mesh_from_csv(path) -> Mesh:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Mesh(data[:, 0], data[:, 1:].T)

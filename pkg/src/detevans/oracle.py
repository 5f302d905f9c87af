"""Finite-difference spectrum of the linearized operator, used as an independent check."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .model import ignition, ignition_prime


def fd_operator(profile, grid_points: int = 2000) -> tuple[np.ndarray, np.ndarray]:
    """Dense matrix of the linearized operator on a uniform interior grid.

    The perturbation (u, z) satisfies
        lambda u = u'' - ((ubar - 1) u)' + q k (phi'(ubar) zbar u + phi(ubar) z)
        lambda z = D z'' + z' - k (phi'(ubar) zbar u + phi(ubar) z)
    and vanishes at both truncation points.  Returns (matrix, grid).
    """
    if grid_points < 3:
        raise ValueError("grid_points must be at least 3")
    p = profile.params
    k = profile.k_found
    x = np.linspace(-profile.M_minus, profile.M_plus, grid_points + 2)
    h = x[1] - x[0]
    xi = x[1:-1]
    vals = profile(x)
    ub, zb = vals[0], vals[1]
    n = grid_points
    phi = ignition(ub[1:-1], p)
    dphi_z = ignition_prime(ub[1:-1], p) * zb[1:-1]
    a = ub - 1.0                         # advection coefficient on all nodes
    lap = (np.diag(np.full(n - 1, 1.0), -1) - 2.0 * np.eye(n) + np.diag(np.full(n - 1, 1.0), 1)) / h**2
    # centered derivative of (a u): (a_{i+1} u_{i+1} - a_{i-1} u_{i-1}) / 2h
    adv = (np.diag(a[2:-1], 1) - np.diag(a[1:-2], -1)) / (2.0 * h)
    d1 = (np.diag(np.full(n - 1, 1.0), 1) - np.diag(np.full(n - 1, 1.0), -1)) / (2.0 * h)
    A = np.zeros((2 * n, 2 * n))
    A[:n, :n] = lap - adv + np.diag(p.q * k * dphi_z)
    A[:n, n:] = np.diag(p.q * k * phi)
    A[n:, :n] = np.diag(-k * dphi_z)
    A[n:, n:] = p.D * lap + d1 - np.diag(k * phi)
    return A, xi


def fd_oracle(profile, grid_points: int = 2000) -> np.ndarray:
    """All eigenvalues of the finite-difference operator, sorted by decreasing real part."""
    A, _ = fd_operator(profile, grid_points)
    ev = scipy.linalg.eigvals(A, check_finite=False)
    return ev[np.argsort(-ev.real, kind="stable")]

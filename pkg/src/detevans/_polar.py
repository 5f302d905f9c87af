"""Compiled kernels for the orthogonalized subspace flow.

The profile is passed as plain arrays (nodes, u, z and their slopes) and is
interpolated with cubic Hermite polynomials, matching ``bvp.evaluate``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

OK = 0
STEP_UNDERFLOW = 1
TOO_MANY_STEPS = 2

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


@njit(cache=True)
def profile_values(x, xs, us, zs, dus, dzs):
    n = xs.size
    i = np.searchsorted(xs, x) - 1
    if i < 0:
        i = 0
    if i > n - 2:
        i = n - 2
    h = xs[i + 1] - xs[i]
    t = (x - xs[i]) / h
    t2 = t * t
    t3 = t2 * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    u = h00 * us[i] + h10 * h * dus[i] + h01 * us[i + 1] + h11 * h * dus[i + 1]
    z = h00 * zs[i] + h10 * h * dzs[i] + h01 * zs[i + 1] + h11 * h * dzs[i + 1]
    g00 = (6 * t2 - 6 * t) / h
    g10 = 3 * t2 - 4 * t + 1
    g01 = (-6 * t2 + 6 * t) / h
    g11 = 3 * t2 - 2 * t
    ux = g00 * us[i] + g10 * dus[i] + g01 * us[i + 1] + g11 * dus[i + 1]
    return u, z, ux


@njit(cache=True)
def fill_matrix(B, form, lam, u, z, ux, q, D, k, E_A, u_ig):
    if u > u_ig:
        s = u - u_ig
        phi = math.exp(-E_A / s)
        dphi = phi * E_A / (s * s)
    else:
        phi = 0.0
        dphi = 0.0
    for i in range(4):
        for j in range(4):
            B[i, j] = 0.0
    if form == 0:
        B[0, 0] = u - 1.0
        B[0, 1] = lam
        B[0, 2] = -q
        B[0, 3] = -q * D
        B[1, 0] = 1.0
        B[1, 2] = q
        B[2, 3] = 1.0
        B[3, 0] = k * dphi * z / D
        B[3, 2] = (lam + k * phi) / D
        B[3, 3] = -1.0 / D
    else:
        B[0, 2] = 1.0
        B[1, 3] = 1.0
        B[2, 0] = lam + ux - q * k * dphi * z
        B[2, 1] = -q * k * phi
        B[2, 2] = u - 1.0
        B[3, 0] = k * dphi * z / D
        B[3, 1] = (lam + k * phi) / D
        B[3, 3] = -1.0 / D


@njit(cache=True)
def _flow(x, y, dy, B, frozen, Bf, form, lam, tau, xs, us, zs, dus, dzs, q, D, k, E_A, u_ig):
    if frozen:
        for i in range(4):
            for j in range(4):
                B[i, j] = Bf[i, j]
    else:
        u, z, ux = profile_values(x, xs, us, zs, dus, dzs)
        fill_matrix(B, form, lam, u, z, ux, q, D, k, E_A, u_ig)
    # BW (4x2), then G = W^H B W (2x2)
    BW = np.zeros((4, 2), dtype=np.complex128)
    for i in range(4):
        for c in range(2):
            acc = 0.0j
            for j in range(4):
                acc += B[i, j] * y[2 * j + c]
            BW[i, c] = acc
    G = np.zeros((2, 2), dtype=np.complex128)
    for a in range(2):
        for c in range(2):
            acc = 0.0j
            for i in range(4):
                acc += np.conj(y[2 * i + a]) * BW[i, c]
            G[a, c] = acc
    for i in range(4):
        for c in range(2):
            dy[2 * i + c] = BW[i, c] - (y[2 * i] * G[0, c] + y[2 * i + 1] * G[1, c])
    dy[8] = G[0, 0] + G[1, 1] - tau


@njit(cache=True)
def _reorthonormalize(y):
    n1 = 0.0
    for i in range(4):
        n1 += y[2 * i].real ** 2 + y[2 * i].imag ** 2
    n1 = math.sqrt(n1)
    for i in range(4):
        y[2 * i] /= n1
    p = 0.0j
    for i in range(4):
        p += np.conj(y[2 * i]) * y[2 * i + 1]
    n2 = 0.0
    for i in range(4):
        y[2 * i + 1] -= p * y[2 * i]
        n2 += y[2 * i + 1].real ** 2 + y[2 * i + 1].imag ** 2
    n2 = math.sqrt(n2)
    for i in range(4):
        y[2 * i + 1] /= n2
    y[8] += math.log(n1 * n2)


@njit(cache=True)
def integrate(x0, x1, y0, form, lam, tau, frozen, Bf, xs, us, zs, dus, dzs,
              q, D, k, E_A, u_ig, rtol, atol, max_steps):
    """Integrate the frame (8 entries) and radial log (entry 8) from x0 to x1."""
    y = y0.copy()
    K = np.zeros((7, 9), dtype=np.complex128)
    B = np.zeros((4, 4), dtype=np.complex128)
    tmp = np.zeros(9, dtype=np.complex128)
    ynew = np.zeros(9, dtype=np.complex128)
    direction = 1.0 if x1 > x0 else -1.0
    span = abs(x1 - x0)
    x = x0
    h = min(0.01, span) * direction
    _flow(x, y, K[0], B, frozen, Bf, form, lam, tau, xs, us, zs, dus, dzs, q, D, k, E_A, u_ig)
    steps = 0
    hmin = 1e-13 * max(1.0, span)
    while (x1 - x) * direction > 0.0:
        if steps >= max_steps:
            return y, x, steps, TOO_MANY_STEPS
        if (x + h - x1) * direction > 0.0:
            h = x1 - x
        for s in range(1, 7):
            for m in range(9):
                acc = y[m]
                for j in range(s):
                    acc += h * _A[s, j] * K[j, m]
                tmp[m] = acc
            _flow(x + _C[s] * h, tmp, K[s], B, frozen, Bf, form, lam, tau,
                  xs, us, zs, dus, dzs, q, D, k, E_A, u_ig)
        for m in range(9):
            ynew[m] = tmp[m]
        err = 0.0
        for m in range(9):
            e = 0.0j
            for j in range(7):
                e += _E[j] * K[j, m]
            sc = atol + rtol * max(abs(y[m]), abs(ynew[m]))
            err += (abs(h * e) / sc) ** 2
        err = math.sqrt(err / 9.0)
        steps += 1
        if err <= 1.0:
            x = x + h
            for m in range(9):
                y[m] = ynew[m]
            _reorthonormalize(y)
            _flow(x, y, K[0], B, frozen, Bf, form, lam, tau, xs, us, zs, dus, dzs, q, D, k, E_A, u_ig)
            fac = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** -0.2)
        else:
            fac = max(0.2, 0.9 * err ** -0.2)
        h = h * fac
        if abs(h) < hmin:
            return y, x, steps, STEP_UNDERFLOW
    return y, x, steps, OK

"""Linearized eigenvalue problem along a profile and the high-frequency bound."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import bvp
from .model import EndStates, ModelParams, ignition, ignition_prime

INTEGRATED = "integrated"
UNINTEGRATED = "unintegrated"
FORMS = (INTEGRATED, UNINTEGRATED)


class SplittingDegenerate(ArithmeticError):
    pass


def coefficient_entries(form: str, lam: complex, u, z, ux, params: ModelParams, k: float) -> np.ndarray:
    """Coefficient matrix from profile values (u, z, u_x) at one abscissa."""
    q, D = params.q, params.D
    phi = ignition(u, params)
    dphi = ignition_prime(u, params)
    if form == INTEGRATED:
        # X = (u, w, z, z'), w' = u + q z
        return np.array([
            [u - 1.0, lam, -q, -q * D],
            [1.0, 0.0, q, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [k * dphi * z / D, 0.0, (lam + k * phi) / D, -1.0 / D],
        ], dtype=complex)
    if form == UNINTEGRATED:
        # W = (u, z, u', z')
        return np.array([
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [lam + ux - q * k * dphi * z, -q * k * phi, u - 1.0, 0.0],
            [k * dphi * z / D, (lam + k * phi) / D, 0.0, -1.0 / D],
        ], dtype=complex)
    raise ValueError(f"form must be one of {FORMS}")


def coefficient_matrix(form: str, x: float, lam: complex, profile) -> np.ndarray:
    """4x4 coefficient matrix at abscissa ``x`` along ``profile``."""
    u, z, _, _ = profile(x)
    ux = _u_derivative(profile, x)
    return coefficient_entries(form, lam, u, z, ux, profile.params, profile.k_found)


def _u_derivative(profile, x):
    """Derivative of the cubic Hermite interpolant of u at x."""
    xs = profile.xi
    if x < xs[0] or x > xs[-1]:
        raise bvp.OutOfRange(f"x={x} outside [{xs[0]}, {xs[-1]}]")
    i = min(max(int(np.searchsorted(xs, x, side="right")) - 1, 0), xs.size - 2)
    h = xs[i + 1] - xs[i]
    t = (x - xs[i]) / h
    return float(bvp._hermite_deriv(h, profile.u[i], profile.u[i + 1],
                                    profile.derivatives[0, i], profile.derivatives[0, i + 1], t))


@dataclass(frozen=True)
class LimitingSystem:
    matrix: np.ndarray
    eigenvalues: np.ndarray   # sorted by increasing real part
    n_stable: int
    n_unstable: int


def end_values(which: str, end_states: EndStates):
    if which == "minus":
        return end_states.u_minus, 0.0
    if which == "plus":
        return end_states.u_plus, 1.0
    raise ValueError("which must be 'minus' or 'plus'")


def limiting_matrix(form: str, which: str, lam: complex, params: ModelParams,
                    end_states: EndStates, k: float, check: bool = True) -> LimitingSystem:
    """Constant-coefficient limit of the eigenvalue system at one end."""
    u, z = end_values(which, end_states)
    B = coefficient_entries(form, lam, u, z, 0.0, params, k)
    mu = np.linalg.eigvals(B)
    mu = mu[np.argsort(mu.real, kind="stable")]
    if check and np.any(np.abs(mu.real) < 1e-10):
        raise SplittingDegenerate(f"eigenvalue on the imaginary axis at lambda={lam}: {mu}")
    return LimitingSystem(B, mu, int(np.sum(mu.real < 0)), int(np.sum(mu.real > 0)))


def sign_function(A: np.ndarray, tol: float = 1e-14, max_iter: int = 100) -> np.ndarray:
    """Matrix sign function by the scaled Newton iteration."""
    X = np.array(A, dtype=complex if np.iscomplexobj(A) else float)
    n = X.shape[0]
    for _ in range(max_iter):
        Xi = np.linalg.inv(X)
        g = abs(np.linalg.det(X)) ** (-1.0 / n)
        Xn = 0.5 * (g * X + Xi / g)
        if np.linalg.norm(Xn - X, 1) <= tol * np.linalg.norm(Xn, 1):
            return Xn
        X = Xn
    raise SplittingDegenerate("sign iteration did not converge")


def spectral_projector(B: np.ndarray, which: str) -> np.ndarray:
    """Projector onto the decaying subspace: stable at 'plus', unstable at 'minus'.

    The split is taken between the second and third eigenvalues ordered by
    real part, which continues the 2/2 splitting of Re(lambda) > 0 to
    lambda = 0.
    """
    mu = np.sort(np.linalg.eigvals(B).real)
    c = 0.5 * (mu[1] + mu[2])
    if mu[2] - mu[1] < 1e-12:
        raise SplittingDegenerate(f"no spectral gap: {mu}")
    S = sign_function(B - c * np.eye(B.shape[0]))
    I = np.eye(B.shape[0])
    P = 0.5 * (I - S) if which == "plus" else 0.5 * (I + S)
    return P


# ---------------------------------------------------------------------------
# high-frequency bound

CRUDE_L = 4.0 * math.exp(-2.0)   # sup of E_A * phi'(u)
CRUDE_M = 6.0 * math.exp(-2.0)


@dataclass(frozen=True)
class HighFreqBound:
    L: float
    M: float
    R: float
    crude: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> HighFreqBound:
        return cls(float(data["L"]), float(data["M"]), float(data["R"]), bool(data["crude"]))


def hf_bound(L: float, M: float, params: ModelParams, k: float) -> float:
    """Radius R with Re(lambda) + |Im(lambda)| <= R for every unstable eigenvalue."""
    if L < 0 or M < 0:
        raise ValueError("L and M must be nonnegative")
    D = params.D
    return max(3.0, 1.0 / (4.0 * D) + (0.25 + 0.5 * abs(D - 1.0) ** 2) * k * L + k * M)


def crude_L_M(params: ModelParams) -> tuple[float, float]:
    """Profile-free bounds, used only for pre-flight sizing."""
    return CRUDE_L / params.E_A, CRUDE_M / params.E_A


def compute_L_M(profile) -> tuple[float, float]:
    """Suprema of phi'(u) z and (1 + q) phi'(u) z - phi(u) over nodes and midpoints."""
    mid = 0.5 * (profile.xi[:-1] + profile.xi[1:])
    vals = profile(mid)
    u = np.concatenate([profile.u, vals[0]])
    z = np.concatenate([profile.z, vals[1]])
    p = profile.params
    dphi_z = ignition_prime(u, p) * z
    L = float(np.max(dphi_z))
    M = float(np.max((1.0 + p.q) * dphi_z - ignition(u, p)))
    return max(L, 0.0), max(M, 0.0)


def high_frequency_bound(profile=None, params: ModelParams = None, k: float = None) -> HighFreqBound:
    if profile is not None:
        L, M = compute_L_M(profile)
        return HighFreqBound(L, M, hf_bound(L, M, profile.params, profile.k_found), False)
    L, M = crude_L_M(params)
    return HighFreqBound(L, M, hf_bound(L, M, params, k), True)

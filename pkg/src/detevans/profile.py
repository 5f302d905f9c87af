"""Weak-detonation profiles as heteroclinic connections of the inflated system.

The reaction rate ``k`` is promoted to an unknown with ``k' = 0``.  The
problem on ``[-M_minus, M_plus]`` is folded onto ``tau in [0, 1]`` with
``U(tau) = U(M_plus tau)`` and ``V(tau) = U(-M_minus tau)``, closed by one
phase condition, four matching conditions at ``tau = 0`` and three
projective conditions at the far ends.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from . import bvp
from .model import EndStates, ModelParams, burned_state, flux, ignition, ignition_prime


class NoConnection(RuntimeError):
    """No heteroclinic connection found (Newton/mesh failure or domain growth exhausted)."""


class ContinuationStalled(RuntimeError):
    def __init__(self, message: str, furthest: "ProfileSolution"):
        super().__init__(message)
        self.furthest = furthest


class DegenerateSplitting(ArithmeticError):
    pass


class ValidationFailed(AssertionError):
    pass


# ---------------------------------------------------------------------------
# traveling-wave vector field

def vector_field(U, params: ModelParams, end_states: EndStates):
    """Right-hand side of the inflated system for state(s) ``U = (u, z, y, k)``."""
    U = np.asarray(U, dtype=float)
    u, z, y, k = U
    um = end_states.u_minus
    du = flux(u) - flux(um) - (u - um) - params.q * (z + params.D * y)
    dy = (-y + k * ignition(u, params) * z) / params.D
    return np.array([du, y, dy, np.zeros_like(du)])


def vector_field_jacobian(U, params: ModelParams):
    """Jacobian of :func:`vector_field`, shape ``(4, 4)`` or ``(4, 4, m)``."""
    U = np.asarray(U, dtype=float)
    u, z, y, k = U
    D, q = params.D, params.q
    phi = ignition(u, params)
    dphi = ignition_prime(u, params)
    zero = np.zeros_like(u)
    one = np.ones_like(u)
    return np.array([
        [u - 1.0, -q * one, -q * D * one, zero],
        [zero, zero, one, zero],
        [k * dphi * z / D, k * phi / D, -one / D, phi * z / D],
        [zero, zero, zero, zero],
    ])


class _System:
    """Vector field with either ``k`` (default) or ``q`` as the inflated unknown."""

    def __init__(self, params: ModelParams, inflation: str = "k", k_fixed: float = 1.0):
        if inflation not in ("k", "q"):
            raise ValueError("inflation must be 'k' or 'q'")
        self.params = params
        self.inflation = inflation
        self.k_fixed = k_fixed

    def _unpack(self, U):
        u, z, y, p = U
        if self.inflation == "k":
            return u, z, y, p, self.params.q
        return u, z, y, self.k_fixed, p

    def u_minus(self, U):
        if self.inflation == "k":
            return burned_state(self.params.q, self.params.u_plus)
        q = U[3] if np.ndim(U[3]) == 0 else U[3].flat[0]
        return burned_state(float(q), self.params.u_plus)

    def F(self, U):
        u, z, y, k, q = self._unpack(U)
        D = self.params.D
        if self.inflation == "k":
            um = burned_state(q, self.params.u_plus)
        else:
            up = self.params.u_plus
            um = 1.0 - np.sqrt(np.maximum(1.0 - 2.0 * (q + up * (1.0 - 0.5 * up)), 0.0))
        du = flux(u) - flux(um) - (u - um) - q * (z + D * y)
        dy = (-y + k * ignition(u, self.params) * z) / D
        return np.array([du, y, dy, np.zeros_like(du)])

    def J(self, U):
        u, z, y, k, q = self._unpack(U)
        D = self.params.D
        phi = ignition(u, self.params)
        dphi = ignition_prime(u, self.params)
        zero = np.zeros_like(u)
        one = np.ones_like(u)
        if self.inflation == "k":
            dp_u, dp_y = zero, phi * z / D
        else:
            # d(f(um) - um)/dq cancels to 1 via the Rankine-Hugoniot relation
            dp_u, dp_y = 1.0 - (z + D * y), zero
        return np.array([
            [u - 1.0, -q * one, -q * D * one, dp_u],
            [zero, zero, one, zero],
            [k * dphi * z / D, k * phi / D, -one / D, dp_y],
            [zero, zero, zero, zero],
        ])


# ---------------------------------------------------------------------------
# end-state linearizations and projective conditions

@dataclass(frozen=True)
class EndLinearization:
    which: str
    matrix: np.ndarray          # inflated 4x4 Jacobian
    eigenvalues: np.ndarray     # of the inflated matrix
    eigenvalues3: np.ndarray    # of the un-inflated 3x3 block, sorted descending by real part
    subspace: np.ndarray        # 4 x p basis of the manifold tangent (with the k direction)
    complement: np.ndarray      # 4 x (4 - p) orthonormal basis of its orthogonal complement

    @property
    def signs3(self) -> tuple:
        return tuple(int(np.sign(v)) if abs(v) > 1e-10 else 0 for v in self.eigenvalues3.real)


def _end_state_vector(which: str, end_states: EndStates, k: float) -> np.ndarray:
    if which == "minus":
        return np.array([end_states.u_minus, 0.0, 0.0, k])
    if which == "plus":
        return np.array([end_states.u_plus, 1.0, 0.0, k])
    raise ValueError("which must be 'minus' or 'plus'")


def end_linearization(which: str, params: ModelParams, end_states: EndStates, k: float) -> EndLinearization:
    """Linearize at U_minus (2-dim unstable side) or U_plus (3-dim stable side)."""
    U = _end_state_vector(which, end_states, k)
    A = vector_field_jacobian(U, params)
    A3 = A[:3, :3]
    w3, V3 = np.linalg.eig(A3)
    order = np.argsort(-w3.real)
    w3, V3 = w3[order], V3[:, order]
    if np.any(np.abs(w3.imag) > 1e-12):
        raise DegenerateSplitting(f"complex end-state spectrum at {which}: {w3}")
    w3, V3 = w3.real, V3.real
    near_zero = np.abs(w3) < 1e-10
    ek = np.zeros((4, 1))
    ek[3, 0] = 1.0
    if which == "minus":
        if near_zero.any():
            raise DegenerateSplitting(f"zero eigenvalue at U_minus: {w3}")
        if not (w3[0] > 0 and w3[1] < 0):
            raise DegenerateSplitting(f"expected (+, -, -) at U_minus, got {w3}")
        r = V3[:, 0] / V3[1, 0]
        S = np.hstack([np.vstack([r[:, None] / np.linalg.norm(r), [[0.0]]]), ek])
    else:
        if near_zero.sum() != 1 or not np.all(w3[~near_zero] < 0):
            raise DegenerateSplitting(f"expected (0, -, -) at U_plus, got {w3}")
        Vs = V3[:, ~near_zero]
        Qs, _ = np.linalg.qr(Vs)
        S = np.hstack([np.vstack([Qs, np.zeros((1, 2))]), ek])
    Q, _ = np.linalg.qr(S, mode="complete")
    complement = Q[:, S.shape[1]:]
    return EndLinearization(which, A, np.linalg.eigvals(A), w3, S, complement)


def projective_conditions(U_end, which: str, params: ModelParams, end_states: EndStates) -> np.ndarray:
    """Residual ``Pi^T (U_end - U_end_state)``; two rows at minus, one at plus."""
    U_end = np.asarray(U_end, dtype=float)
    lin = end_linearization(which, params, end_states, float(U_end[3]))
    return lin.complement.T @ (U_end - _end_state_vector(which, end_states, float(U_end[3])))


# ---------------------------------------------------------------------------
# domain doubling

@dataclass(frozen=True)
class DoubledProblem:
    problem: bvp.BvpProblem
    M_minus: float
    M_plus: float
    phase_value: float


def double(params: ModelParams, end_states: EndStates, M_minus: float, M_plus: float,
           phase_value: Optional[float] = None, inflation: str = "k",
           k_fixed: float = 1.0) -> DoubledProblem:
    """Fold the three-point problem on ``[-M_minus, M_plus]`` into an 8-dim two-point problem."""
    system = _System(params, inflation, k_fixed)
    if phase_value is None:
        phase_value = 0.5 * (end_states.u_plus + end_states.u_minus)
    plus_lin = None
    if inflation == "k":
        plus_lin = end_linearization("plus", params, end_states, 1.0)

    def rhs(x, Y):
        return np.vstack([M_plus * system.F(Y[:4]), -M_minus * system.F(Y[4:])])

    def rhs_jacobian(x, Y):
        J = np.zeros((8, 8, x.size))
        J[:4, :4] = M_plus * system.J(Y[:4])
        J[4:, 4:] = -M_minus * system.J(Y[4:])
        return J

    def _proj(which, Uend):
        if inflation == "k":
            p, ends = params, end_states
        else:
            q = float(Uend[3])
            p = params.with_(q=q)
            ends = EndStates(u_minus=system.u_minus(Uend), u_plus=params.u_plus)
            Uend = np.array([Uend[0], Uend[1], Uend[2], k_fixed])
        if which == "plus" and plus_lin is not None:
            return plus_lin.complement.T @ (Uend - _end_state_vector("plus", ends, Uend[3]))
        return projective_conditions(Uend, which, p, ends)

    def bc(ya, yb):
        return np.concatenate([
            [ya[0] - phase_value],
            ya[:4] - ya[4:],
            _proj("minus", yb[4:]),
            _proj("plus", yb[:4]),
        ])

    def bc_jacobians(ya, yb):
        Ja = np.zeros((8, 8))
        Jb = np.zeros((8, 8))
        Ja[0, 0] = 1.0
        Ja[1:5, :4] = np.eye(4)
        Ja[1:5, 4:] = -np.eye(4)
        for which, rows, cols, Uend in (("minus", slice(5, 7), slice(4, 8), yb[4:]),
                                        ("plus", slice(7, 8), slice(0, 4), yb[:4])):
            base = _proj(which, Uend)
            block = np.zeros((base.size, 4))
            for j in range(4):
                h = 1e-7 * max(1.0, abs(Uend[j]))
                e = np.zeros(4)
                e[j] = h
                block[:, j] = (_proj(which, Uend + e) - _proj(which, Uend - e)) / (2 * h)
            Jb[rows, cols] = block
        return Ja, Jb

    problem = bvp.BvpProblem(8, rhs, bc, rhs_jacobian, bc_jacobians)
    return DoubledProblem(problem, M_minus, M_plus, phase_value)


# ---------------------------------------------------------------------------
# solutions

@dataclass(frozen=True)
class ProfileSettings:
    residual_tolerance: float = 1e-6
    boundary_tolerance: float = 1e-3
    M_minus: float = 20.0
    M_plus: float = 20.0
    domain_growth: float = 1.5
    max_domain_growths: int = 10
    mesh_points: int = 300
    max_mesh_points: int = 20000
    newton_max_iterations: int = 50
    k_guess: float = 1.0
    phase_value: Optional[float] = None
    inflation: str = "k"
    k_fixed: float = 1.0
    retry_on_larger_domain: bool = True

    def bvp_settings(self) -> bvp.SolverSettings:
        return bvp.SolverSettings(residual_tolerance=self.residual_tolerance,
                                  newton_max_iterations=self.newton_max_iterations,
                                  max_mesh_points=self.max_mesh_points)


@dataclass(frozen=True)
class ProfileSolution:
    """Converged profile on ``[-M_minus, M_plus]``; ``states`` rows are (u, z, y, k)."""

    xi: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray
    k_found: float
    params: ModelParams
    end_states: EndStates
    M_minus: float
    M_plus: float
    boundary_residuals: tuple
    phase_value: float
    info: dict = field(default_factory=dict, compare=False)

    @property
    def u(self):
        return self.states[0]

    @property
    def z(self):
        return self.states[1]

    @property
    def y(self):
        return self.states[2]

    def mesh(self) -> bvp.Mesh:
        return bvp.Mesh(self.xi, self.states, self.derivatives)

    def __call__(self, x):
        return bvp.evaluate(self.mesh(), x)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "k_found": self.k_found,
            "u_minus": self.end_states.u_minus,
            "u_plus": self.end_states.u_plus,
            "M_minus": self.M_minus,
            "M_plus": self.M_plus,
            "boundary_residuals": list(self.boundary_residuals),
            "phase_value": self.phase_value,
            "n_nodes": int(self.xi.size),
            "info": {k: v for k, v in self.info.items() if isinstance(v, (int, float, str))},
        }

    def save(self, path) -> Path:
        """Write ``<path>.json`` metadata and ``<path>.csv`` (xi, u, z, y)."""
        path = Path(path)
        base = path.with_suffix("")
        base.parent.mkdir(parents=True, exist_ok=True)
        meta = self.to_dict()
        meta["profile_csv"] = base.with_suffix(".csv").name
        base.with_suffix(".json").write_text(json.dumps(meta, indent=2))
        with open(base.with_suffix(".csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["xi", "u", "z", "y"])
            for j in range(self.xi.size):
                w.writerow([f"{self.xi[j]:.17g}", f"{self.u[j]:.17g}",
                            f"{self.z[j]:.17g}", f"{self.y[j]:.17g}"])
        return base.with_suffix(".json")

    @classmethod
    def load(cls, path) -> ProfileSolution:
        path = Path(path)
        base = path.with_suffix("")
        meta = json.loads(base.with_suffix(".json").read_text())
        data = np.loadtxt(base.parent / meta.get("profile_csv", base.with_suffix(".csv").name),
                          delimiter=",", skiprows=1, ndmin=2)
        params = ModelParams.from_dict(meta["params"])
        ends = EndStates(u_minus=meta["u_minus"], u_plus=meta["u_plus"])
        k = float(meta["k_found"])
        states = np.vstack([data[:, 1:4].T, np.full(data.shape[0], k)])
        return cls(data[:, 0], states, vector_field(states, params, ends), k, params, ends,
                   float(meta["M_minus"]), float(meta["M_plus"]),
                   tuple(meta["boundary_residuals"]), float(meta["phase_value"]),
                   dict(meta.get("info", {})))


def _logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def initial_guess(params: ModelParams, end_states: EndStates, M_minus: float, M_plus: float,
                  k: float = 1.0, n: int = 300, phase_value: Optional[float] = None) -> bvp.Mesh:
    """Logistic fronts in u and z meeting the phase condition at xi = 0."""
    up, um = end_states.u_plus, end_states.u_minus
    if phase_value is None:
        phase_value = 0.5 * (up + um)
    shift = -math.log((um - up) / (phase_value - up) - 1.0)
    xi = np.linspace(-M_minus, M_plus, n)
    if not np.any(xi == 0.0):
        xi = np.sort(np.append(xi, 0.0))
    u = up + (um - up) * _logistic(-(xi - shift))
    u[xi == 0.0] = phase_value
    D = params.D
    z = _logistic(xi / D)
    y = z * (1.0 - z) / D
    return bvp.Mesh(xi, np.vstack([u, z, y, np.full_like(xi, k)]))


def _sample(guess, xi):
    """Evaluate a guess (Mesh or ProfileSolution) with constant extension outside its span."""
    mesh = guess.mesh() if isinstance(guess, ProfileSolution) else guess
    x = np.clip(xi, mesh.nodes[0], mesh.nodes[-1])
    return bvp.evaluate(mesh, x)


def _tau_nodes(guess, M_minus, M_plus, n):
    """Equidistribute tau nodes on the arc length of both folded halves of the guess."""
    fine = np.linspace(0.0, 1.0, 8 * n + 1)
    Up = _sample(guess, M_plus * fine)[:3]
    Vm = _sample(guess, -M_minus * fine)[:3]
    scale = np.maximum(np.ptp(np.hstack([Up, Vm]), axis=1), 1e-12)[:, None]
    seg = np.sqrt(np.sum((np.diff(Up, axis=1) / scale) ** 2, axis=0)) + \
        np.sqrt(np.sum((np.diff(Vm, axis=1) / scale) ** 2, axis=0))
    density = np.concatenate([[0.0], np.cumsum(seg + 2.0 / fine.size)])
    targets = np.linspace(0.0, density[-1], n)
    tau = np.interp(targets, density, fine)
    tau[0], tau[-1] = 0.0, 1.0
    return np.unique(tau)


def _guess_k(guess, default):
    if isinstance(guess, ProfileSolution):
        return guess.k_found
    return float(guess.values[3, 0]) if guess.n >= 4 else default


def _fold(guess, M_minus, M_plus, n, param_value=None):
    tau = _tau_nodes(guess, M_minus, M_plus, n)
    Up = _sample(guess, M_plus * tau)
    Vm = _sample(guess, -M_minus * tau)
    if param_value is not None:
        Up[3] = param_value
        Vm[3] = param_value
    return bvp.Mesh(tau, np.vstack([Up, Vm]))


def _unfold(sol: bvp.Mesh, dp: DoubledProblem, system: _System):
    tau = sol.nodes
    xi = np.concatenate([-dp.M_minus * tau[::-1][:-1], dp.M_plus * tau])
    states = np.hstack([sol.values[4:, ::-1][:, :-1], sol.values[:4]])
    jump = float(np.max(np.abs(sol.values[:4, 0] - sol.values[4:, 0])))
    return xi, states, jump


def _boundary_residuals(states, end_states):
    left = np.array([end_states.u_minus, 0.0, 0.0])
    right = np.array([end_states.u_plus, 1.0, 0.0])
    return (float(np.linalg.norm(states[:3, 0] - left)),
            float(np.linalg.norm(states[:3, -1] - right)))


def _decay_rates(params: ModelParams, end_states: EndStates, k: float):
    """Slowest linear decay rates toward U_minus (as xi -> -inf) and U_plus."""
    D = params.D
    g = max(k, 1e-300) * ignition(end_states.u_minus, params) / D
    rate_m = 0.5 * (-1.0 / D + math.sqrt(1.0 / D**2 + 4.0 * g))
    rate_p = min(1.0 - end_states.u_plus, 1.0 / D)
    return max(rate_m, 1e-12), rate_p


def solve_profile(params: ModelParams, guess=None, settings: ProfileSettings = ProfileSettings()) -> ProfileSolution:
    """Compute a weak-detonation profile and its reaction rate ``k``.

    ``guess`` may be a :class:`ProfileSolution` (continuation) or a 4-row
    :class:`~detevans.bvp.Mesh` on xi; by default the logistic guess is used.
    The computational domain grows until both end states are matched to
    ``settings.boundary_tolerance``.
    """
    params.validate()
    end_states = EndStates.from_params(params)
    inflation = settings.inflation
    M_minus, M_plus = settings.M_minus, settings.M_plus
    n = settings.mesh_points
    param_value = None
    if isinstance(guess, ProfileSolution):
        M_minus = max(M_minus, guess.M_minus)
        M_plus = max(M_plus, guess.M_plus)
        n = max(n, int(0.75 * guess.xi.size / 2))
        if inflation == "q":
            param_value = guess.params.q
    elif guess is None:
        guess = initial_guess(params, end_states, M_minus, M_plus, k=settings.k_guess,
                              phase_value=settings.phase_value)
        if inflation == "q":
            param_value = params.q
    system = _System(params, inflation, settings.k_fixed)
    bvp_settings = settings.bvp_settings()
    profile = None
    for attempt in range(settings.max_domain_growths + 1):
        dp = double(params, end_states, M_minus, M_plus, settings.phase_value,
                    inflation, settings.k_fixed)
        mesh = _fold(guess, M_minus, M_plus, n, param_value)
        try:
            sol = bvp.solve(dp.problem, mesh, bvp_settings)
        except (bvp.BvpError, DegenerateSplitting, np.linalg.LinAlgError, ValueError) as exc:
            failure = f"profile solve failed on [-{M_minus:g}, {M_plus:g}]: {exc}"
            if attempt < settings.max_domain_growths and settings.retry_on_larger_domain:
                # a truncation that is too short may have no nearby solution:
                # lengthen the end that is least resolved by its slowest decay rate
                rate_m, rate_p = _decay_rates(params, end_states, _guess_k(guess, settings.k_guess))
                if M_minus * rate_m <= M_plus * rate_p:
                    M_minus *= settings.domain_growth
                else:
                    M_plus *= settings.domain_growth
                continue
            raise NoConnection(failure) from exc
        xi, states, jump = _unfold(sol, dp, system)
        if inflation == "k":
            k_found, p_found, ends = float(states[3, 0]), params, end_states
        else:
            q_found = float(states[3, 0])
            if not (0.0 < q_found < 0.5 * (params.u_plus - 1.0) ** 2):
                raise NoConnection(f"inflated q left the physical range: {q_found}")
            p_found = params.with_(q=q_found)
            ends = EndStates.from_params(p_found)
            k_found = settings.k_fixed
            states = states.copy()
            states[3] = k_found
        if not (k_found > 0 and np.isfinite(k_found)):
            raise NoConnection(f"solver returned non-positive reaction rate k = {k_found}")
        if np.min(states[1]) < -1e-6 or np.max(states[1]) > 1.0 + 1e-6:
            raise NoConnection("mass fraction z left [0, 1]")
        res = _boundary_residuals(states, ends)
        derivs = vector_field(states, p_found, ends)
        profile = ProfileSolution(
            xi, states, derivs, k_found, p_found, ends, M_minus, M_plus, res,
            dp.phase_value,
            dict(sol.info, matching_jump=jump, domain_growths=attempt, inflation=inflation),
        )
        if max(res) < settings.boundary_tolerance:
            return profile
        if res[0] >= settings.boundary_tolerance:
            M_minus *= settings.domain_growth
        if res[1] >= settings.boundary_tolerance:
            M_plus *= settings.domain_growth
        guess = profile
        n = max(settings.mesh_points, int(0.75 * sol.size))
        if inflation == "q":
            param_value = p_found.q
    if profile is None:
        raise NoConnection(failure)
    raise NoConnection(f"boundary residuals {profile.boundary_residuals} above tolerance "
                       "after domain growth")


# ---------------------------------------------------------------------------
# continuation

@dataclass(frozen=True)
class ContinuationSchedule:
    initial_steps: int = 4
    growth: float = 1.5
    min_fraction: float = 1.0 / 256.0


_CONT_KEYS = ("q", "D", "E_A", "u_ig", "u_plus")


def continue_family(start: ProfileSolution, target: ModelParams,
                    schedule: ContinuationSchedule = ContinuationSchedule(),
                    settings: ProfileSettings = ProfileSettings()) -> ProfileSolution:
    """Natural-parameter continuation along the straight line from start.params to target."""
    p0 = np.array([getattr(start.params, key) for key in _CONT_KEYS])
    p1 = np.array([getattr(target, key) for key in _CONT_KEYS])
    if np.array_equal(p0, p1):
        return start
    target.validate()
    s, ds = 0.0, 1.0 / schedule.initial_steps
    current = start
    history = [(0.0, math.log(start.k_found))]
    steps = 0
    while s < 1.0:
        s_try = min(1.0, s + ds)
        params = ModelParams(**dict(zip(_CONT_KEYS, p0 + s_try * (p1 - p0))))
        if s_try == 1.0:
            params = target
        local = settings
        if len(history) >= 2 and settings.inflation == "k":
            (sa, ka), (sb, kb) = history[-2], history[-1]
            k_pred = math.exp(kb + (kb - ka) * (s_try - sb) / (sb - sa))
            guess = _with_k(current, k_pred)
        else:
            guess = current
        try:
            nxt = solve_profile(params, guess, local)
        except NoConnection:
            nxt = None
            if guess is not current:
                try:
                    nxt = solve_profile(params, current, local)
                except NoConnection:
                    nxt = None
        if nxt is None:
            ds *= 0.5
            if ds < schedule.min_fraction:
                raise ContinuationStalled(
                    f"continuation stalled at fraction {s:.4g} toward {target}", current)
            continue
        current, s = nxt, s_try
        history.append((s, math.log(nxt.k_found)))
        steps += 1
        ds = min(ds * schedule.growth, 1.0)
    return replace(current, info=dict(current.info, continuation_steps=steps))


def _with_k(profile: ProfileSolution, k: float) -> ProfileSolution:
    states = profile.states.copy()
    states[3] = k
    return replace(profile, states=states, k_found=k)


# ---------------------------------------------------------------------------
# explicit tail and validation

@dataclass(frozen=True)
class TailSolution:
    beta: float
    C_u: float
    C_z: float


def tail_beta(params: ModelParams, end_states: EndStates) -> float:
    um = end_states.u_minus
    return math.sqrt(um * um - 2.0 * um + 2.0 * params.q + 1.0)


def explicit_tail(xi, tail: TailSolution, params: ModelParams):
    """Closed-form solution where the reaction is switched off (u < u_ig).

    Here ``z + D y = 1`` and ``u' = ((u - 1)^2 - beta^2) / 2``.
    """
    xi = np.asarray(xi, dtype=float)
    D = params.D
    e = np.exp(-xi / D)
    u = 1.0 + tail.beta * np.tanh(-0.5 * tail.beta * xi + tail.C_u)
    z = 1.0 - tail.C_z * D * e
    y = tail.C_z * e
    return u, z, y


def fit_tail(sol: ProfileSolution, mask=None) -> TailSolution:
    """Least-squares integration constants on the sub-mesh where u < u_ig."""
    if mask is None:
        mask = (sol.u < sol.params.u_ig) & (sol.xi > 0)
    xi, u, z, y = sol.xi[mask], sol.u[mask], sol.z[mask], sol.y[mask]
    if xi.size < 3:
        raise ValidationFailed("explicit tail: fewer than 3 nodes with u < u_ig")
    beta = tail_beta(sol.params, sol.end_states)
    D = sol.params.D
    e = np.exp(-xi / D)
    a = np.concatenate([1.0 - z, y])
    b = np.concatenate([D * e, e])
    bb = float(b @ b)
    # for small D the reactant is already burned out on the whole sub-mesh
    C_z = float(a @ b / bb) if bb > 1e-280 else 0.0
    j = int(np.argmax(u))
    C0 = math.atanh(np.clip((u[j] - 1.0) / beta, -1 + 1e-15, 1 - 1e-15)) + 0.5 * beta * xi[j]
    fit = least_squares(lambda c: 1.0 + beta * np.tanh(-0.5 * beta * xi + c[0]) - u, [C0],
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return TailSolution(beta, float(fit.x[0]), C_z)


@dataclass
class ProfileDiagnostics:
    monotone: bool
    max_increase: float
    bounded: bool
    max_excess: float
    decay_slopes: tuple
    decay_ok: bool
    tail_error: float
    tail_ok: bool
    boundary_ok: bool
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _decay_slope(dist, r, floor=1e-12):
    # below ``floor`` the distance is dominated by round-off in the states
    keep = dist > floor
    if keep.sum() < 2:
        return -np.inf
    return float(np.polyfit(r[keep], np.log(dist[keep]), 1)[0])


def validate_profile(sol: ProfileSolution, raise_on_failure: bool = False,
                     noise: float = 1e-9, tail_tolerance: float = 1e-4,
                     boundary_tolerance: float = 1e-3) -> ProfileDiagnostics:
    """Check monotonicity, the u <= u_minus bound, exponential decay and the explicit tail.

    ``noise`` absorbs solver round-off in the flat tails, where successive
    values of u differ by less than the Newton tolerance.
    """
    failures = []
    du = np.diff(sol.u)
    max_increase = float(du.max())
    monotone = max_increase <= noise
    if not monotone:
        failures.append(f"monotonicity: u increases by {max_increase:.3e}")
    max_excess = float(np.max(sol.u) - sol.end_states.u_minus)
    bounded = max_excess <= noise
    if not bounded:
        failures.append(f"bound: max u exceeds u_minus by {max_excess:.3e}")

    left = sol.xi <= -0.75 * sol.M_minus
    right = sol.xi >= 0.75 * sol.M_plus
    Um = np.array([sol.end_states.u_minus, 0.0, 0.0])[:, None]
    Up = np.array([sol.end_states.u_plus, 1.0, 0.0])[:, None]
    slope_m = _decay_slope(np.linalg.norm(sol.states[:3, left] - Um, axis=0), -sol.xi[left])
    slope_p = _decay_slope(np.linalg.norm(sol.states[:3, right] - Up, axis=0), sol.xi[right])
    decay_ok = slope_m < 0 and slope_p < 0
    if not decay_ok:
        failures.append(f"decay: tail log-slopes ({slope_m:.3g}, {slope_p:.3g}) not negative")

    try:
        mask = (sol.u < sol.params.u_ig) & (sol.xi > 0)
        tail = fit_tail(sol, mask)
        tu, tz, ty = explicit_tail(sol.xi[mask], tail, sol.params)
        tail_error = float(max(np.max(np.abs(tu - sol.u[mask])), np.max(np.abs(tz - sol.z[mask])),
                               np.max(np.abs(ty - sol.y[mask]))))
    except ValidationFailed as exc:
        failures.append(str(exc))
        tail_error = math.inf
    tail_ok = tail_error < tail_tolerance
    if not tail_ok and math.isfinite(tail_error):
        failures.append(f"tail: explicit-solution sup error {tail_error:.3e}")
    boundary_ok = max(sol.boundary_residuals) < boundary_tolerance
    if not boundary_ok:
        failures.append(f"boundary residuals {sol.boundary_residuals}")
    report = ProfileDiagnostics(monotone, max_increase, bounded, max_excess, (slope_m, slope_p),
                                decay_ok, tail_error, tail_ok, boundary_ok, failures)
    if raise_on_failure and failures:
        raise ValidationFailed("; ".join(failures))
    return report

"""Evans function along contours and zero counting by the argument principle.

Each side of the wave contributes a two-dimensional subspace of solutions of
``X' = B(x; lambda) X`` that decay at its far end.  The subspace is started
from the spectral projector of the limiting matrix, continued analytically
in ``lambda`` by projector transport along the contour, and integrated to
``x = 0`` as an orthonormal frame plus a scalar log-radius.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _polar
from .spectral import (INTEGRATED, UNINTEGRATED, HighFreqBound, SplittingDegenerate,
                       compute_L_M, hf_bound, limiting_matrix, spectral_projector)


class SplittingLost(ArithmeticError):
    pass


class IntegratorFailure(RuntimeError):
    def __init__(self, message: str, lam: complex):
        super().__init__(f"{message} at lambda={lam}")
        self.lam = lam


class RefinementBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class EvansSettings:
    rtol: float = 1e-6
    atol: float = 1e-8
    form: str = INTEGRATED
    n0: int = 120
    indent_factor: float = 1e-3
    radius_margin: float = 1.1
    refine_threshold: float = 0.2
    certify_threshold: float = math.pi / 2
    max_nodes: int = 4000
    max_steps: int = 200000
    normalize_radial: bool = True
    # E(0) is a cancellation of two nearly parallel subspaces; a tighter
    # tolerance keeps its size a fair measure of the translational zero
    origin_rtol: float = 1e-10
    origin_atol: float = 1e-12
    indent_exclusion: float = 0.1

    def __post_init__(self):
        if self.form not in (INTEGRATED, UNINTEGRATED):
            raise ValueError(f"unknown form {self.form!r}")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if self.n0 < 8:
            raise ValueError("n0 must be at least 8")
        if not 0 < self.indent_factor < 1:
            raise ValueError("indent_factor must lie in (0, 1)")
        if self.radius_margin < 1:
            raise ValueError("radius_margin must be >= 1")
        if not 0 < self.refine_threshold <= self.certify_threshold:
            raise ValueError("need 0 < refine_threshold <= certify_threshold")


# ---------------------------------------------------------------------------
# contour


@dataclass(frozen=True)
class EvansContour:
    """Boundary of the right half disk of radius ``radius`` indented at 0.

    The closed loop is parametrized by ``t in [0, 1]`` with
    ``point(1 - t) = conj(point(t))``; ``t in [0, 1/2]`` runs from ``radius``
    along the arc to ``i radius``, down the imaginary axis and around the
    indentation to ``indent_radius``.
    """

    radius: float
    indent_radius: float
    t: np.ndarray

    @property
    def _lengths(self):
        R, r0 = self.radius, self.indent_radius
        return 0.5 * math.pi * R, R - r0, 0.5 * math.pi * r0

    def point(self, t):
        t = np.asarray(t, dtype=float)
        R, r0 = self.radius, self.indent_radius
        L1, L2, L3 = self._lengths
        Lu = L1 + L2 + L3
        upper = np.where(t <= 0.5, t, 1.0 - t)
        s = 2.0 * upper * Lu
        lam = np.where(
            s <= L1, R * np.exp(1j * s / R),
            np.where(s <= L1 + L2, 1j * (R - (s - L1)),
                     r0 * np.exp(1j * (0.5 * math.pi - (s - L1 - L2) / r0))))
        lam = np.where(t <= 0.5, lam, np.conj(lam))
        return lam

    @property
    def nodes(self) -> np.ndarray:
        """All nodes of the closed loop, counterclockwise, first == last."""
        return self.point(self.t)

    @property
    def upper_t(self) -> np.ndarray:
        return self.t[self.t <= 0.5]


def build_contour(R: float, r0: float, n0: int = 120, ratio: float = 1.2) -> EvansContour:
    """Initial nodes by arc length, refined geometrically toward the origin."""
    if not (R > r0 > 0):
        raise ValueError("need R > r0 > 0")
    if n0 < 8:
        raise ValueError("n0 must be at least 8")
    c = EvansContour(float(R), float(r0), np.array([0.0, 1.0]))
    L1, L2, L3 = c._lengths
    Lu = L1 + L2 + L3
    h_max = Lu / max(n0 // 2, 4)
    h = min(L3 / 4.0, h_max)
    gaps = []
    total = 0.0
    while total < Lu:
        gaps.append(h)
        total += h
        h = min(h * ratio, h_max)
    gaps = np.array(gaps[::-1]) * (Lu / total)   # fine spacing at the origin end
    s = np.concatenate([[0.0], np.cumsum(gaps)])
    s[-1] = Lu
    t_upper = 0.5 * s / Lu
    t = np.concatenate([t_upper, 1.0 - t_upper[-2::-1]])
    return EvansContour(float(R), float(r0), t)


# ---------------------------------------------------------------------------
# frames and samples


@dataclass(frozen=True)
class SubspaceFrame:
    lam: complex
    basis: np.ndarray
    radial_log: complex
    x: float = 0.0


@dataclass(frozen=True)
class EvansSample:
    lam: complex
    E: complex
    E_reduced: complex


class _Side:
    """Limiting data of one end at a given lambda."""

    def __init__(self, evaluator: "EvansEvaluator", which: str, lam: complex):
        p = evaluator.profile
        lim = limiting_matrix(evaluator.settings.form, which, lam, p.params, p.end_states,
                              p.k_found, check=False)
        B = lim.matrix
        if complex(lam).imag == 0.0:
            B = B.real
        self.P = spectral_projector(B, which)
        if np.iscomplexobj(self.P) and complex(lam).imag == 0.0:
            self.P = self.P.real
        self.tau = complex(np.trace(self.P @ B)) if evaluator.settings.normalize_radial else 0.0
        self.B = lim.matrix
        mu = lim.eigenvalues
        if complex(lam) != 0:
            want = (mu.real < 0) if which == "plus" else (mu.real > 0)
            if want.sum() != 2 or np.any(np.abs(mu.real) < 1e-10):
                raise SplittingLost(f"splitting {int(want.sum())}/{4 - int(want.sum())} "
                                    f"at {which} end, lambda={lam}")


def _real_basis(P: np.ndarray) -> np.ndarray:
    U, _, _ = np.linalg.svd(np.real(P))
    return U[:, :2].astype(complex)


def kato_transport(P: np.ndarray, previous: np.ndarray) -> np.ndarray:
    return P @ previous


def frame_from_basis(lam: complex, R: np.ndarray, x: float) -> SubspaceFrame:
    Q, Rm = np.linalg.qr(R)
    return SubspaceFrame(complex(lam), Q, complex(np.log(complex(np.linalg.det(Rm)))), x)


class EvansEvaluator:
    """Evans function of one profile with Kato-consistent initial frames."""

    def __init__(self, profile, settings: EvansSettings = EvansSettings(),
                 synthetic_zero: Optional[complex] = None):
        self.profile = profile
        self.settings = settings
        self.synthetic_zero = synthetic_zero
        p = profile.params
        self._arrays = (np.ascontiguousarray(profile.xi, dtype=float),
                        np.ascontiguousarray(profile.u, dtype=float),
                        np.ascontiguousarray(profile.z, dtype=float),
                        np.ascontiguousarray(profile.derivatives[0], dtype=float),
                        np.ascontiguousarray(profile.derivatives[1], dtype=float))
        self._scalars = (float(p.q), float(p.D), float(profile.k_found), float(p.E_A), float(p.u_ig))
        self._form_id = 0 if settings.form == INTEGRATED else 1
        # parameter-keyed cache of (lambda, plus basis, minus basis, sample)
        self._cache: dict = {}
        self.evaluations = 0

    # -- frames ---------------------------------------------------------
    def initial_bases(self, lam: complex, previous=None):
        """Analytic bases (R_plus, R_minus) at lam; transported from ``previous``."""
        out = []
        for i, which in enumerate(("plus", "minus")):
            side = _Side(self, which, lam)
            if previous is None:
                if complex(lam).imag != 0.0:
                    raise ValueError("frames must be started at a real lambda")
                R = _real_basis(side.P)
            else:
                R = kato_transport(side.P, previous[i])
                if complex(lam).imag == 0.0:
                    R = R.real.astype(complex)
            out.append(R)
        return tuple(out)

    def integrate_side(self, frame: SubspaceFrame, which: str, rtol=None, atol=None,
                       frozen: Optional[np.ndarray] = None) -> SubspaceFrame:
        """Carry ``frame`` from its far end to x = 0."""
        s = self.settings
        lam = frame.lam
        side = _Side(self, which, lam)
        y0 = np.empty(9, dtype=np.complex128)
        y0[:8] = np.asarray(frame.basis, dtype=complex).reshape(-1)
        y0[8] = frame.radial_log
        Bf = np.zeros((4, 4), dtype=np.complex128) if frozen is None else np.asarray(frozen, complex)
        y, x, steps, status = _polar.integrate(
            float(frame.x), 0.0, y0, self._form_id, complex(lam), complex(side.tau),
            frozen is not None, Bf, *self._arrays, *self._scalars,
            float(rtol or s.rtol), float(atol or s.atol), int(s.max_steps))
        if status != _polar.OK:
            reason = "step size underflow" if status == _polar.STEP_UNDERFLOW else "step budget exhausted"
            raise IntegratorFailure(f"{which} side: {reason} near x={x:.6g}", lam)
        return SubspaceFrame(complex(lam), y[:8].reshape(4, 2).copy(), complex(y[8]), 0.0)

    def evaluate(self, lam: complex, bases, rtol=None, atol=None) -> EvansSample:
        p = self.profile
        plus = frame_from_basis(lam, bases[0], p.M_plus)
        minus = frame_from_basis(lam, bases[1], -p.M_minus)
        fp = self.integrate_side(plus, "plus", rtol, atol)
        fm = self.integrate_side(minus, "minus", rtol, atol)
        self.evaluations += 1
        return evans_eval(lam, fp, fm, self.synthetic_zero)

    # -- contour interface ------------------------------------------------
    def along(self, contour: EvansContour, t_new) -> np.ndarray:
        """E_reduced at upper-half parameters ``t_new``, transporting frames from the left."""
        t_new = np.sort(np.asarray(t_new, dtype=float))
        out = []
        for t in t_new:
            key = float(t)
            if key not in self._cache:
                lam = complex(contour.point(key))
                left = [tk for tk in self._cache if tk < key]
                if left:
                    prev = self._cache[max(left)]
                    bases = self.initial_bases(lam, (prev[1], prev[2]))
                else:
                    if lam.imag != 0.0:
                        raise ValueError("the first contour node must be real")
                    bases = self.initial_bases(lam)
                sample = self.evaluate(lam, bases)
                self._cache[key] = (lam, bases[0], bases[1], sample)
            out.append(self._cache[key][3].E_reduced)
        return np.array(out)

    def samples(self, t_values) -> list:
        return [self._cache[float(t)][3] for t in t_values]

    def on_real_axis(self, lams) -> list:
        """Samples at real lambda, transported downward from the largest value."""
        lams = sorted((float(v) for v in lams), reverse=True)
        prev = None
        out = []
        for lam in lams:
            bases = self.initial_bases(lam, prev)
            out.append(self.evaluate(lam, bases))
            prev = bases
        return out[::-1]

    def at_origin(self, start: float, rtol=None, atol=None) -> EvansSample:
        """E(0) from frames transported along the real axis from ``start``.

        The path is traversed in geometric steps of ratio 0.8 down to
        ``1e-6`` so that the projector transport stays a small-step
        approximation of the analytic continuation.
        """
        stop = min(1e-6, 1e-4 * float(start))
        n = int(math.ceil(math.log(float(start) / stop) / math.log(1.25)))
        b = None
        for lam in np.geomspace(float(start), stop, n + 1):
            b = self.initial_bases(float(lam), b)
        b = self.initial_bases(0.0, b)
        s = self.settings
        return self.evaluate(0.0, b, rtol or s.origin_rtol, atol or s.origin_atol)


def evans_eval(lam: complex, plus: SubspaceFrame, minus: SubspaceFrame,
               synthetic_zero: Optional[complex] = None) -> EvansSample:
    """Determinant of [plus | minus] at x = 0 with both radial factors restored."""
    M = np.hstack([plus.basis, minus.basis])
    E = complex(np.linalg.det(M) * np.exp(plus.radial_log + minus.radial_log))
    lam = complex(lam)
    Er = E / lam if lam != 0 else complex("nan")
    if synthetic_zero is not None and lam != 0:
        Er *= (lam - synthetic_zero) / (lam + 1.0)
    return EvansSample(lam, E, Er)


# ---------------------------------------------------------------------------
# winding number


@dataclass
class WindingResult:
    winding: int
    samples: list
    max_arg_step: float
    refinement_count: int
    certified: bool
    t: np.ndarray = field(default_factory=lambda: np.empty(0))
    values: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))
    lambdas: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))
    message: str = ""


def _arg_steps(values: np.ndarray) -> np.ndarray:
    return np.angle(values[1:] / values[:-1])


def winding_number(f, contour: EvansContour, refine_threshold: float = 0.2,
                   certify_threshold: float = math.pi / 2, max_nodes: int = 4000,
                   symmetric: Optional[bool] = None) -> WindingResult:
    """Winding of ``f`` around 0 along ``contour`` with adaptive node insertion.

    ``f`` is either an :class:`EvansEvaluator` (evaluated on the upper half
    and reflected, since the Evans function is real on the real axis) or a
    callable of lambda evaluated on the whole loop.
    """
    if isinstance(f, EvansEvaluator):
        sample = lambda t: f.along(contour, t)
        sym = True if symmetric is None else symmetric
    else:
        sample = lambda t: np.asarray(f(contour.point(t)), dtype=complex)
        sym = bool(symmetric)
    t = contour.upper_t.copy() if sym else contour.t.copy()
    vals = sample(t)
    refinements = 0
    message = ""

    def assemble(t, vals):
        if sym:
            return (np.concatenate([t, 1.0 - t[::-1]]),
                    np.concatenate([vals, np.conj(vals[::-1])]))
        return t, vals

    while True:
        if np.any(~np.isfinite(vals)) or np.any(vals == 0):
            message = "function vanished or was not finite at a node"
            break
        steps = np.abs(_arg_steps(vals))
        bad = np.nonzero(steps > refine_threshold)[0]
        if bad.size == 0:
            break
        total = (2 * t.size if sym else t.size) + (2 * bad.size if sym else bad.size)
        if total > max_nodes:
            message = "refinement budget exceeded"
            break
        mids = 0.5 * (t[bad] + t[bad + 1])
        new_vals = sample(mids)
        t = np.concatenate([t, mids])
        vals = np.concatenate([vals, new_vals])
        order = np.argsort(t, kind="stable")
        t, vals = t[order], vals[order]
        refinements += bad.size

    t_full, v_full = assemble(t, vals)
    with np.errstate(invalid="ignore", divide="ignore"):
        steps = _arg_steps(v_full)
    finite = np.all(np.isfinite(steps))
    total = float(np.sum(steps)) if finite else float("nan")
    max_step = float(np.max(np.abs(steps))) if finite else float("inf")
    winding = int(round(total / (2 * math.pi))) if finite else 0
    certified = finite and max_step < certify_threshold and not message
    if finite and abs(total / (2 * math.pi) - winding) > 1e-6:
        certified = False
    lambdas = contour.point(t_full)
    if isinstance(f, EvansEvaluator):
        upper = f.samples(t)
        samples = upper + [EvansSample(np.conj(s.lam), np.conj(s.E), np.conj(s.E_reduced))
                           for s in upper[::-1]]
    else:
        samples = [EvansSample(l, v, v) for l, v in zip(lambdas, v_full)]
    return WindingResult(winding, samples, max_step, refinements, bool(certified),
                         t_full, v_full, lambdas, message)


def cauchy_winding(lambdas: np.ndarray, values: np.ndarray) -> float:
    """Trapezoidal estimate of the contour integral of f'/f over 2 pi i.

    ``f'`` is approximated by centered differences along the closed loop;
    duplicate consecutive nodes are dropped first.
    """
    lam = np.asarray(lambdas, complex)
    v = np.asarray(values, complex)
    keep = np.concatenate([[True], np.abs(np.diff(lam)) > 1e-15])
    lam, v = lam[keep], v[keep]
    if abs(lam[0] - lam[-1]) < 1e-12:
        lam, v = lam[:-1], v[:-1]
    n = lam.size
    nxt, prv = np.roll(np.arange(n), -1), np.roll(np.arange(n), 1)
    # derivative of the quadratic through three consecutive nodes
    l0, l1, l2 = lam[prv], lam, lam[nxt]
    f0, f1, f2 = v[prv], v, v[nxt]
    d = (f0 * (l1 - l2) / ((l0 - l1) * (l0 - l2))
         + f1 * (2 * l1 - l0 - l2) / ((l1 - l0) * (l1 - l2))
         + f2 * (l1 - l0) / ((l2 - l0) * (l2 - l1)))
    g = d / v
    dl = lam[nxt] - lam
    integral = np.sum(0.5 * (g + g[nxt]) * dl)
    return float((integral / (2j * math.pi)).real)


# ---------------------------------------------------------------------------
# verdicts

STABLE = "Stable"
UNSTABLE = "Unstable"
INCONCLUSIVE = "Inconclusive"


@dataclass
class StabilityVerdict:
    kind: str
    winding: Optional[int] = None
    certified: bool = False
    indent_ok: bool = False
    indent_ratio: float = float("nan")
    origin_ratio: float = float("nan")
    radius: float = float("nan")
    indent_radius: float = float("nan")
    n_nodes: int = 0
    refinement_count: int = 0
    max_arg_step: float = float("nan")
    message: str = ""
    winding_result: Optional[WindingResult] = field(default=None, repr=False, compare=False)

    @property
    def label(self) -> str:
        return f"Unstable({self.winding})" if self.kind == UNSTABLE else self.kind

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("kind", "winding", "certified", "indent_ok", "indent_ratio", "origin_ratio",
                 "radius", "indent_radius", "n_nodes", "refinement_count", "max_arg_step",
                 "message")}

    @classmethod
    def from_dict(cls, data: dict) -> StabilityVerdict:
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


def certify_stability(profile, bound: Optional[HighFreqBound] = None,
                      settings: EvansSettings = EvansSettings(),
                      synthetic_zero: Optional[complex] = None,
                      radius: Optional[float] = None) -> StabilityVerdict:
    """Count zeros of E/lambda inside the indented half disk of radius margin * R."""
    if bound is None:
        L, M = compute_L_M(profile)
        bound = HighFreqBound(L, M, hf_bound(L, M, profile.params, profile.k_found), False)
    R = float(radius) if radius is not None else settings.radius_margin * bound.R
    if not R > 0:
        raise ValueError("contour radius must be positive")
    r0 = settings.indent_factor * R
    contour = build_contour(R, r0, settings.n0)
    ev = EvansEvaluator(profile, settings, synthetic_zero)
    base = dict(radius=R, indent_radius=r0)
    try:
        res = winding_number(ev, contour, settings.refine_threshold, settings.certify_threshold,
                             settings.max_nodes)
        E0 = ev.at_origin(R)
    except (IntegratorFailure, SplittingLost, SplittingDegenerate, np.linalg.LinAlgError) as exc:
        return StabilityVerdict(INCONCLUSIVE, message=str(exc), **base)
    mags = np.abs(res.values)
    lam = res.lambdas
    on_indent = np.abs(lam) < 1.5 * r0
    indent_ratio = float(np.min(mags[on_indent]) / np.median(mags)) if on_indent.any() else float("nan")
    indent_ok = bool(indent_ratio > settings.indent_exclusion)
    Emax = max(abs(s.E) for s in res.samples)
    origin_ratio = float(abs(E0.E) / Emax) if Emax > 0 else float("nan")
    common = dict(winding=res.winding, certified=res.certified, indent_ok=indent_ok,
                  indent_ratio=indent_ratio, origin_ratio=origin_ratio,
                  n_nodes=int(res.t.size), refinement_count=res.refinement_count,
                  max_arg_step=res.max_arg_step, message=res.message,
                  winding_result=res, **base)
    if not res.certified:
        return StabilityVerdict(INCONCLUSIVE, **common)
    if res.winding > 0:
        return StabilityVerdict(UNSTABLE, **common)
    if res.winding == 0 and indent_ok:
        return StabilityVerdict(STABLE, **common)
    if res.winding == 0:
        common["message"] = "E/lambda nearly vanishes on the indentation"
    return StabilityVerdict(INCONCLUSIVE, **common)


def write_contour_csv(result: WindingResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re_lambda", "im_lambda", "re_E", "im_E", "re_E_reduced", "im_E_reduced"])
        for s in result.samples:
            w.writerow([f"{v:.17g}" for v in (s.lam.real, s.lam.imag, s.E.real, s.E.imag,
                                              s.E_reduced.real, s.E_reduced.imag)])
    return path

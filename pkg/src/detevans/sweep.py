"""Parameter sweeps: profiles, bounds and stability verdicts over a grid.

Every grid point has a fixed parent one grid step closer to the anchor point
(the grid point nearest q = 0.499, E_A = 1, D = 1).  A point is continued
from its nearest converged ancestor, so the outcome never depends on how
many workers run or on whether the sweep was resumed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .evans import (INCONCLUSIVE, EvansSettings, StabilityVerdict, certify_stability,
                    write_contour_csv)
from .model import ModelParams
from .oracle import fd_oracle  # noqa: F401  (re-exported)
from .profile import (ContinuationSchedule, ContinuationStalled, NoConnection, ProfileSettings,
                      ProfileSolution, continue_family, solve_profile, validate_profile)
from .spectral import HighFreqBound, compute_L_M, hf_bound

CONVERGED = "Converged"
NO_CONNECTION = "NoConnection"
STALLED = "ContinuationStalled"

FULL_Q = (0.4990, 0.4764, 0.4537, 0.4311, 0.4085, 0.3858, 0.3632, 0.3405,
           0.3179, 0.2953, 0.2726, 0.2500)
FULL_E_A = (1e-3, 0.1437, 0.2864, 0.4291, 0.5719, 0.7146, 0.8573, 1.0,
             1.5556, 2.1111, 2.6667, 3.2222, 3.7778, 4.3333, 4.8889, 5.4444, 6.0)
FULL_D = (1e-3, 0.1437, 0.2864, 0.4291, 0.5719, 0.7146, 0.8573, 1.0, 2.5556, 4.1111,
           5.6667, 7.2222, 8.7778, 10.3333, 11.8889, 13.4444, 15.0)

ANCHOR = (0.499, 1.0, 1.0)


@dataclass(frozen=True)
class ParameterGrid:
    q_values: tuple
    E_A_values: tuple
    D_values: tuple
    u_plus: float = 0.0
    u_ig: float = 0.1

    def __post_init__(self):
        for name in ("q_values", "E_A_values", "D_values"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(set(vals)) != len(vals):
                raise ValueError(f"{name} contains duplicates")
            object.__setattr__(self, name, vals)

    @classmethod
    def full(cls) -> ParameterGrid:
        return cls(FULL_Q, FULL_E_A, FULL_D)

    @classmethod
    def desk(cls) -> ParameterGrid:
        return cls((0.499, 0.408, 0.25), (1e-3, 1.0), (0.14, 1.0, 15.0))

    def __len__(self) -> int:
        return len(self.q_values) * len(self.E_A_values) * len(self.D_values)

    def validate(self) -> None:
        for p in self.points():
            p.validate()

    def _sorted(self):
        return (sorted(self.q_values, reverse=True), sorted(self.E_A_values), sorted(self.D_values))

    def indices(self) -> list:
        """Index triples (iq, ie, id) in traversal order: D outermost, then E_A, then q."""
        qs, es, ds = self._sorted()
        return [(iq, ie, i_d) for i_d in range(len(ds)) for ie in range(len(es)) for iq in range(len(qs))]

    def params_at(self, idx) -> ModelParams:
        qs, es, ds = self._sorted()
        iq, ie, i_d = idx
        return ModelParams(q=qs[iq], D=ds[i_d], E_A=es[ie], u_ig=self.u_ig, u_plus=self.u_plus)

    def points(self) -> list:
        return [self.params_at(i) for i in self.indices()]

    def anchor_index(self):
        qs, es, ds = self._sorted()
        near = lambda vals, x, scale: min(range(len(vals)), key=lambda i: (abs(scale(vals[i]) - scale(x)), i))
        return (near(qs, ANCHOR[0], float), near(es, ANCHOR[1], math.log), near(ds, ANCHOR[2], math.log))

    def parent(self, idx):
        """One grid step toward the anchor: D first, then E_A, then q."""
        a = self.anchor_index()
        iq, ie, i_d = idx
        step = lambda i, j: i + (1 if j > i else -1)
        if i_d != a[2]:
            return (iq, ie, step(i_d, a[2]))
        if ie != a[1]:
            return (iq, step(ie, a[1]), i_d)
        if iq != a[0]:
            return (step(iq, a[0]), ie, i_d)
        return None

    def depth(self, idx) -> int:
        a = self.anchor_index()
        return sum(abs(i - j) for i, j in zip(idx, a))

    def to_dict(self) -> dict:
        return {"q_values": list(self.q_values), "E_A_values": list(self.E_A_values),
                "D_values": list(self.D_values), "u_plus": self.u_plus, "u_ig": self.u_ig}


def param_key(params: ModelParams) -> str:
    """Stable short hash of the model parameters."""
    blob = json.dumps({k: repr(float(v)) for k, v in params.to_dict().items()}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class RunRecord:
    params: ModelParams
    profile_status: str
    k_found: Optional[float] = None
    M_minus: Optional[float] = None
    M_plus: Optional[float] = None
    boundary_residuals: Optional[tuple] = None
    bound: Optional[HighFreqBound] = None
    verdict: Optional[StabilityVerdict] = None
    winding: Optional[int] = None
    validation_ok: Optional[bool] = None
    validation_failures: list = field(default_factory=list)
    continued_from: Optional[str] = None
    message: str = ""
    timings: dict = field(default_factory=dict, compare=False)

    @property
    def key(self) -> str:
        return param_key(self.params)

    @property
    def certified(self) -> bool:
        return self.verdict is not None and self.verdict.certified and self.verdict.kind != INCONCLUSIVE

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "params": self.params.to_dict(),
            "profile_status": self.profile_status,
            "k_found": self.k_found,
            "M_minus": self.M_minus,
            "M_plus": self.M_plus,
            "boundary_residuals": None if self.boundary_residuals is None else list(self.boundary_residuals),
            "bound": None if self.bound is None else self.bound.to_dict(),
            "verdict": None if self.verdict is None else self.verdict.to_dict(),
            "winding": self.winding,
            "validation_ok": self.validation_ok,
            "validation_failures": list(self.validation_failures),
            "continued_from": self.continued_from,
            "message": self.message,
            "timings": dict(self.timings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> RunRecord:
        return cls(
            params=ModelParams.from_dict(d["params"]),
            profile_status=d["profile_status"],
            k_found=d.get("k_found"),
            M_minus=d.get("M_minus"),
            M_plus=d.get("M_plus"),
            boundary_residuals=None if d.get("boundary_residuals") is None else tuple(d["boundary_residuals"]),
            bound=None if d.get("bound") is None else HighFreqBound.from_dict(d["bound"]),
            verdict=None if d.get("verdict") is None else StabilityVerdict.from_dict(d["verdict"]),
            winding=d.get("winding"),
            validation_ok=d.get("validation_ok"),
            validation_failures=list(d.get("validation_failures", [])),
            continued_from=d.get("continued_from"),
            message=d.get("message", ""),
            timings=dict(d.get("timings", {})),
        )


QUADRANTS = (("D<=1", "E_A<=1"), ("D>=1", "E_A<=1"), ("D<=1", "E_A>=1"), ("D>=1", "E_A>=1"))


def quadrants_of(params: ModelParams) -> list:
    """Quadrants containing a point; D = 1 or E_A = 1 falls in both halves."""
    d_side = [s for s, ok in (("D<=1", params.D <= 1.0), ("D>=1", params.D >= 1.0)) if ok]
    e_side = [s for s, ok in (("E_A<=1", params.E_A <= 1.0), ("E_A>=1", params.E_A >= 1.0)) if ok]
    return [(a, b) for a in d_side for b in e_side]


@dataclass
class SuccessTable:
    attempted: dict = field(default_factory=lambda: {q: 0 for q in QUADRANTS})
    converged: dict = field(default_factory=lambda: {q: 0 for q in QUADRANTS})

    @classmethod
    def from_records(cls, records) -> SuccessTable:
        t = cls()
        for r in records:
            for quad in quadrants_of(r.params):
                t.attempted[quad] += 1
                t.converged[quad] += r.profile_status == CONVERGED
        return t

    def rate(self, quad) -> float:
        a = self.attempted[quad]
        return self.converged[quad] / a if a else float("nan")

    def rows(self) -> list:
        return [(d, e, self.converged[(d, e)], self.attempted[(d, e)]) for d, e in QUADRANTS]

    def format(self) -> str:
        lines = [f"{'D range':8s} {'E_A range':10s} success"]
        for d, e, c, a in self.rows():
            lines.append(f"{d:8s} {e:10s} {c}/{a}")
        return "\n".join(lines)


@dataclass(frozen=True)
class SweepSettings:
    profile: ProfileSettings = ProfileSettings()
    evans: EvansSettings = EvansSettings()
    schedule: ContinuationSchedule = ContinuationSchedule()
    jobs: int = 1
    run_evans: bool = True


# ---------------------------------------------------------------------------
# single point


def _bound(profile: ProfileSolution) -> HighFreqBound:
    L, M = compute_L_M(profile)
    return HighFreqBound(L, M, hf_bound(L, M, profile.params, profile.k_found), False)


def process_point(target: ModelParams, start: ProfileSolution, fallback: Optional[ProfileSolution],
                  settings: SweepSettings):
    """Solve, bound and certify one point.  Returns (record, profile or None, winding result)."""
    t0 = time.perf_counter()
    profile = None
    message = ""
    source = param_key(start.params)
    progressed = False
    for origin in [start] + ([fallback] if fallback is not None and fallback is not start else []):
        try:
            profile = continue_family(origin, target, settings.schedule, settings.profile)
            source = param_key(origin.params)
            break
        except ContinuationStalled as exc:
            message = str(exc)
            progressed = progressed or exc.furthest is not origin
        except NoConnection as exc:
            message = str(exc)
    timings = {"profile_s": time.perf_counter() - t0}
    if profile is None:
        status = STALLED if progressed else NO_CONNECTION
        return RunRecord(target, status, message=message, continued_from=source, timings=timings), None, None
    diag = validate_profile(profile)
    bound = _bound(profile)
    rec = RunRecord(target, CONVERGED, k_found=profile.k_found, M_minus=profile.M_minus,
                    M_plus=profile.M_plus, boundary_residuals=tuple(profile.boundary_residuals),
                    bound=bound, validation_ok=diag.ok, validation_failures=list(diag.failures),
                    continued_from=source, timings=timings)
    winding = None
    if settings.run_evans:
        t1 = time.perf_counter()
        verdict = certify_stability(profile, bound, settings.evans)
        winding = verdict.winding_result
        rec.verdict = verdict
        rec.winding = verdict.winding
        rec.timings["evans_s"] = time.perf_counter() - t1
    return rec, profile, winding


# ---------------------------------------------------------------------------
# persistence


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


SUMMARY_COLUMNS = ("q", "E_A", "D", "status", "k_found", "R", "winding", "verdict")


def summary_rows(records) -> list:
    rows = []
    for r in records:
        rows.append([_fmt(float(r.params.q)), _fmt(float(r.params.E_A)), _fmt(float(r.params.D)),
                     r.profile_status, _fmt(r.k_found), _fmt(None if r.bound is None else r.bound.R),
                     _fmt(r.winding), "" if r.verdict is None else r.verdict.label])
    return rows


def point_dir(out_dir, params: ModelParams) -> Path:
    return Path(out_dir) / "points" / param_key(params)


def write_point(out_dir, record: RunRecord, profile=None, winding=None) -> None:
    d = point_dir(out_dir, record.params)
    try:
        d.mkdir(parents=True, exist_ok=True)
        if profile is not None:
            profile.save(d / "profile.json")
        if winding is not None:
            write_contour_csv(winding, d / "contour.csv")
    except OSError as exc:
        raise OSError(f"cannot write point artifacts under {d}: {exc}") from exc


def append_record(out_dir, record: RunRecord) -> None:
    path = Path(out_dir) / "records.jsonl"
    try:
        with open(path, "a") as fh:
            fh.write(json.dumps(record.to_dict()) + "\n")
    except OSError as exc:
        raise OSError(f"cannot append to {path}: {exc}") from exc


def read_records(path) -> list:
    path = Path(path)
    if path.is_dir():
        path = path / "records.jsonl"
    if not path.exists():
        return []
    return [RunRecord.from_dict(json.loads(line)) for line in path.read_text().splitlines() if line.strip()]


def write_tables(records, out_dir) -> None:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "summary.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SUMMARY_COLUMNS)
            w.writerows(summary_rows(records))
        table = SuccessTable.from_records(records)
        with open(out / "success_table.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["D_range", "E_A_range", "converged", "attempted"])
            w.writerows(table.rows())
    except OSError as exc:
        raise OSError(f"cannot write tables under {out}: {exc}") from exc


def persist(records, out_dir, profiles: Optional[dict] = None, windings: Optional[dict] = None) -> Path:
    """Write records.jsonl, summary.csv, success_table.csv and per-point artifacts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "records.jsonl").write_text("".join(json.dumps(r.to_dict()) + "\n" for r in records))
    for r in records:
        write_point(out, r, (profiles or {}).get(r.key), (windings or {}).get(r.key))
    write_tables(records, out)
    return out


# ---------------------------------------------------------------------------
# the grid driver


def _tame_profile(grid: ParameterGrid, settings: SweepSettings) -> ProfileSolution:
    p = ModelParams(q=ANCHOR[0], E_A=ANCHOR[1], D=ANCHOR[2], u_ig=grid.u_ig, u_plus=grid.u_plus)
    return solve_profile(p, settings=settings.profile)


def run_grid(grid: ParameterGrid, settings: SweepSettings = SweepSettings(),
             out_dir=None, resume: bool = False, progress=None):
    """Run every grid point.  Returns (records in traversal order, SuccessTable)."""
    indices = grid.indices()
    if not indices:
        if out_dir is not None:
            persist([], out_dir)
        return [], SuccessTable()
    grid.validate()
    out = Path(out_dir) if out_dir is not None else None
    done: dict = {}
    profiles: dict = {}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if resume:
            for r in read_records(out):
                done[r.key] = r
        elif (out / "records.jsonl").exists():
            (out / "records.jsonl").unlink()
    tame = _tame_profile(grid, settings)

    def load_profile(idx):
        params = grid.params_at(idx)
        key = param_key(params)
        if key in profiles:
            return profiles[key]
        rec = done.get(key)
        if rec is None or rec.profile_status != CONVERGED or out is None:
            return None
        prof = ProfileSolution.load(point_dir(out, params) / "profile.json")
        profiles[key] = prof
        return prof

    def start_for(idx):
        p = grid.parent(idx)
        while p is not None:
            prof = load_profile(p)
            if prof is not None:
                return prof
            p = grid.parent(p)
        return tame

    by_depth: dict = {}
    for idx in indices:
        by_depth.setdefault(grid.depth(idx), []).append(idx)
    pool = ProcessPoolExecutor(settings.jobs) if settings.jobs > 1 else None
    try:
        for depth in sorted(by_depth):
            todo = [i for i in by_depth[depth] if param_key(grid.params_at(i)) not in done]
            tasks = [(grid.params_at(i), start_for(i), tame, settings) for i in todo]
            if pool is None:
                results = [process_point(*t) for t in tasks]
            else:
                results = list(pool.map(process_point, *zip(*tasks))) if tasks else []
            for rec, prof, wind in results:
                done[rec.key] = rec
                if prof is not None:
                    profiles[rec.key] = prof
                if out is not None:
                    write_point(out, rec, prof, wind)
                    append_record(out, rec)
                if progress is not None:
                    progress(rec)
    finally:
        if pool is not None:
            pool.shutdown()
    records = [done[param_key(grid.params_at(i))] for i in indices]
    if out is not None:
        write_tables(records, out)
    return records, SuccessTable.from_records(records)


def sweep_exit_code(records) -> int:
    """0 when every converged point carries a certified verdict, 4 otherwise."""
    ok = all(r.certified for r in records if r.profile_status == CONVERGED)
    return 0 if ok else 4

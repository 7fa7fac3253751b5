"""Parameter sweeps, finite-difference derivatives and transition detection.

A local extremum of S_N/N is reported as a first-order candidate and a local
extremum of d(S_N/N)/dparam as a second-order candidate.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.signal import peak_prominences

from . import gaussian_ising
from .eigensolver import ConvergenceError, SolverOptions, lanczos_lowest
from .entanglement import sublattice_entropy
from .hamiltonian import ModelSpec, combine, default_basis, model_terms
from .lattice import Family, SublatticePartition, make_preset_lattice, preset_partition

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
GAUSSIAN_ABOVE = 20
CSV_HEADER = ["param", "energy", "gap", "degenerate", "entropy_bits", "s_over_n", "ds_over_n_dparam"]


class SweepError(RuntimeError):
    pass


def make_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Uniform grid from ``lo`` to ``hi`` inclusive, rounded to kill drift."""
    if step <= 0 or hi < lo:
        raise ValueError(f"bad grid {lo}:{hi}:{step}")
    n = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(n), 12)


def parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must look like lo:hi:step, got {text!r}")
    return make_grid(*(float(p) for p in parts))


# ---------------------------------------------------------------------------
# data types


@dataclass(eq=False)
class EntropyCurve:
    param: str
    grid: np.ndarray
    entropy_bits: np.ndarray
    energy: np.ndarray
    gap: np.ndarray
    degenerate: np.ndarray
    num_sites: int
    fingerprint: str

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        n = len(self.grid)
        for name in ("entropy_bits", "energy", "gap", "degenerate"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} points, grid has {n}")
        if n > 1 and np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")

    @property
    def s_over_n(self) -> np.ndarray:
        return np.asarray(self.entropy_bits) / self.num_sites

    def scaled(self, factor: float) -> "EntropyCurve":
        return EntropyCurve(self.param, self.grid, np.asarray(self.entropy_bits) * factor, self.energy,
                            self.gap, self.degenerate, self.num_sites, self.fingerprint)


@dataclass(frozen=True)
class Candidate:
    location: float
    order: int
    extremum_kind: str
    prominence: float
    source: str


@dataclass
class TransitionReport:
    param: str
    candidates: list[Candidate] = field(default_factory=list)
    fingerprint: str = ""

    def of_order(self, order: int) -> list[Candidate]:
        return [c for c in self.candidates if c.order == order]

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "fingerprint": self.fingerprint,
            "parameter": self.param,
            "candidates": [asdict(c) for c in self.candidates],
        }


@dataclass(frozen=True)
class Thresholds:
    curve: float = 1e-4
    derivative: float = 1e-3
    relative: bool = False


# ---------------------------------------------------------------------------
# cache


def fingerprint(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:20]


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class PointCache:
    """One JSON file per (fingerprint, parameter value)."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    def _path(self, fp: str, value: float) -> Path:
        return self.root / fp / f"{float(value)!r}.json"

    def get(self, fp: str, value: float) -> dict | None:
        p = self._path(fp, value)
        if not p.exists():
            return None
        try:
            return json.loads(p.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            log.warning("ignoring unreadable cache entry %s", p)
            return None

    def put(self, fp: str, value: float, record: dict) -> None:
        atomic_write_text(self._path(fp, value), json.dumps(record, sort_keys=True))


# ---------------------------------------------------------------------------
# sweeps


def _use_gaussian(spec: ModelSpec, method: str) -> bool:
    if method == "gaussian":
        if spec.family is not Family.ISING_CHAIN:
            raise SweepError("the Gaussian path exists only for ISING_CHAIN")
        return True
    if method == "ed":
        return False
    return spec.family is Family.ISING_CHAIN and spec.lattice.num_sites > GAUSSIAN_ABOVE


def sweep_fingerprint(spec: ModelSpec, param: str, partition: SublatticePartition, method: str,
                      jordan_wigner: bool, opts: SolverOptions) -> str:
    model = spec.to_dict()
    model["couplings"].pop(param, None)
    return fingerprint({
        "model": model,
        "param": param,
        "partition": list(partition.r_sites),
        "method": method,
        "jordan_wigner": jordan_wigner,
        "solver": {"tol": opts.tol, "max_iter": opts.max_iter, "krylov_dim": opts.krylov_dim},
    })


def solve_point(spec: ModelSpec, partition: SublatticePartition, *, method: str = "auto",
                jordan_wigner: bool = False, opts: SolverOptions | None = None, _terms=None) -> dict:
    """Energy, gap and sublattice entropy at one coupling point."""
    opts = opts or SolverOptions()
    if _use_gaussian(spec, method):
        state = gaussian_ising.build_kernel(spec.lattice.num_sites, spec.couplings["lambda"])
        eps = np.sort(state.single_particle_energies)
        return {
            "energy": state.ground_energy,
            "gap": float(eps[0] + eps[1]),
            "entropy_bits": gaussian_ising.subsystem_entropy(state, partition.r_sites).bits,
        }
    basis, terms = _terms if _terms is not None else _prepare(spec)
    h = combine(terms, spec.couplings)
    gs = lanczos_lowest(h, opts=opts)
    ent = sublattice_entropy(gs, basis, partition, jordan_wigner=jordan_wigner)
    return {"energy": gs.energy, "gap": gs.gap, "entropy_bits": ent.bits}


def _prepare(spec: ModelSpec):
    basis = default_basis(spec)
    return basis, model_terms(spec, basis)


def run_sweep(
    spec: ModelSpec,
    param: str,
    grid: Sequence[float],
    partition: SublatticePartition | None = None,
    *,
    method: str = "auto",
    jordan_wigner: bool = False,
    opts: SolverOptions | None = None,
    cache: PointCache | None = None,
    workers: int = 1,
) -> EntropyCurve:
    """Sweep coupling ``param`` over ``grid`` with every other coupling held fixed."""
    opts = opts or SolverOptions()
    grid = np.asarray(grid, dtype=float)
    if len(grid) < 5:
        raise SweepError("a sweep needs at least 5 grid points")
    if param not in spec.couplings:
        raise SweepError(f"{spec.family.value} has no coupling {param!r}; choose from {sorted(spec.couplings)}")
    partition = partition or preset_partition(spec.lattice)
    if partition.num_sites != spec.lattice.num_sites:
        raise SweepError("partition does not match the lattice")
    fp = sweep_fingerprint(spec, param, partition, method, jordan_wigner, opts)
    prepared = None if _use_gaussian(spec, method) else _prepare(spec)

    def point(value: float) -> dict:
        if cache is not None:
            hit = cache.get(fp, value)
            if hit is not None:
                return hit
        try:
            rec = solve_point(spec.with_coupling(param, float(value)), partition, method=method,
                              jordan_wigner=jordan_wigner, opts=opts, _terms=prepared)
        except (ConvergenceError, ValueError) as exc:
            raise SweepError(f"solve failed at {param}={float(value)!r}: {exc}") from exc
        rec = {"param": float(value), **rec}
        if cache is not None:
            cache.put(fp, value, rec)
        return rec

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(point, grid))
    else:
        records = [point(v) for v in grid]
    gap = np.array([r["gap"] for r in records], dtype=float)
    return EntropyCurve(
        param=param,
        grid=grid,
        entropy_bits=np.array([r["entropy_bits"] for r in records]),
        energy=np.array([r["energy"] for r in records]),
        gap=gap,
        degenerate=gap < opts.degeneracy_tol,
        num_sites=spec.lattice.num_sites,
        fingerprint=fp,
    )


# ---------------------------------------------------------------------------
# analysis


def grid_step(grid: np.ndarray) -> float:
    grid = np.asarray(grid, dtype=float)
    if len(grid) < 5:
        raise SweepError("derivative needs at least 5 grid points")
    steps = np.diff(grid)
    h = float(np.mean(steps))
    if np.max(np.abs(steps - h)) > 1e-9 * max(1.0, abs(h)):
        raise SweepError("derivative needs a uniform grid")
    return h


def derivative(curve: EntropyCurve | np.ndarray, grid: np.ndarray | None = None) -> np.ndarray:
    """d(S/N)/dparam: central differences inside, second-order one-sided at the ends."""
    if isinstance(curve, EntropyCurve):
        values, grid = curve.s_over_n, curve.grid
    else:
        values = np.asarray(curve, dtype=float)
    h = grid_step(grid)
    return np.gradient(values, h, edge_order=2)


def _strict_extrema(x: np.ndarray) -> list[tuple[int, str]]:
    out = []
    for i in range(1, len(x) - 1):
        if x[i] > x[i - 1] and x[i] > x[i + 1]:
            out.append((i, "max"))
        elif x[i] < x[i - 1] and x[i] < x[i + 1]:
            out.append((i, "min"))
    return out


def _prominence(x: np.ndarray, i: int, kind: str) -> float:
    y = x if kind == "max" else -x
    return float(peak_prominences(y, [i])[0][0])


def find_extrema(x: np.ndarray, threshold: float) -> list[tuple[int, str, float]]:
    found = []
    for i, kind in _strict_extrema(x):
        p = _prominence(x, i, kind)
        if p >= threshold:
            found.append((i, kind, p))
    return found


def detect_transitions(curve: EntropyCurve, deriv: np.ndarray | None = None,
                       thresholds: Thresholds | None = None) -> TransitionReport:
    """Classify extrema of S/N (order 1) and of its derivative (order 2)."""
    thresholds = thresholds or Thresholds()
    s = curve.s_over_n
    d = derivative(curve) if deriv is None else np.asarray(deriv, dtype=float)
    if len(d) != len(s):
        raise SweepError("derivative and curve are not aligned")
    grid = curve.grid
    # only the suppression window needs a step; short curves are fine here
    h = float(np.max(np.diff(grid))) if len(grid) > 1 else 0.0
    t_curve, t_deriv = thresholds.curve, thresholds.derivative
    if thresholds.relative:
        t_curve *= float(np.ptp(s)) or 1.0
        t_deriv *= float(np.ptp(d)) or 1.0
    first = [Candidate(float(grid[i]), 1, kind, p, "CURVE") for i, kind, p in find_extrema(s, t_curve)]
    second = []
    for i, kind, p in find_extrema(d, t_deriv):
        if any(abs(grid[i] - c.location) <= h * (1 + 1e-9) for c in first):
            continue
        second.append(Candidate(float(grid[i]), 2, kind, p, "DERIVATIVE"))
    cands = sorted(first + second, key=lambda c: (c.location, c.order))
    return TransitionReport(curve.param, cands, curve.fingerprint)


# ---------------------------------------------------------------------------
# output


def _fmt(x: float) -> str:
    return repr(float(x))


def curve_to_csv(curve: EntropyCurve, deriv: np.ndarray | None = None) -> str:
    d = derivative(curve) if deriv is None else deriv
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    n = len(curve.grid)
    s = curve.s_over_n
    for i in range(n):
        w.writerow([
            _fmt(curve.grid[i]), _fmt(curve.energy[i]), _fmt(curve.gap[i]), int(bool(curve.degenerate[i])),
            _fmt(curve.entropy_bits[i]), _fmt(s[i]), "" if i in (0, n - 1) else _fmt(d[i]),
        ])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# extended Hubbard phase boundaries


@dataclass
class BoundaryRow:
    U: float
    first_order: float | None
    lower: float | None
    upper: float | None
    report: TransitionReport

    @property
    def width(self) -> float | None:
        if self.lower is None or self.upper is None:
            return None
        return self.upper - self.lower


def hubbard_phase_scan(U_values: Sequence[float], V_grid: Sequence[float], N: int, *,
                       partition: SublatticePartition | None = None, opts: SolverOptions | None = None,
                       thresholds: Thresholds | None = None, cache: PointCache | None = None,
                       workers: int = 1) -> list[BoundaryRow]:
    """For each U, sweep V and pick the S/N maximum plus the nearest flanking derivative extrema."""
    if N not in (6, 8, 10):
        raise SweepError(f"Hubbard scans support N in (6, 8, 10), got {N}")
    lattice = make_preset_lattice(Family.HUBBARD_CHAIN, N)
    rows = []
    for U in U_values:
        spec = ModelSpec(Family.HUBBARD_CHAIN, lattice, {"U": float(U), "V": 0.0})
        curve = run_sweep(spec, "V", V_grid, partition, opts=opts, cache=cache, workers=workers)
        report = detect_transitions(curve, thresholds=thresholds)
        maxima = [c for c in report.of_order(1) if c.extremum_kind == "max"]
        top = max(maxima, key=lambda c: c.prominence) if maxima else None
        lower = upper = None
        if top is not None:
            below = [c.location for c in report.of_order(2) if c.location < top.location]
            above = [c.location for c in report.of_order(2) if c.location > top.location]
            lower = max(below) if below else None
            upper = min(above) if above else None
        rows.append(BoundaryRow(float(U), top.location if top else None, lower, upper, report))
    return rows

"""Command-line entry point: ``entroscope sweep | point | hubbard | validate``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.

A sweep config is a JSON object, e.g.::

    {
      "model": "ISING_CHAIN",
      "size": 10,
      "couplings": {},
      "sweep": {"param": "lambda", "grid": "0:2:0.02"},
      "partition": [0, 2, 4, 6, 8]
    }

Optional keys: ``lattice`` (explicit lattice JSON instead of ``size``),
``method`` (auto | ed | gaussian), ``jordan_wigner``, ``solver``,
``thresholds`` and ``output`` ({"dir", "stem"}).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .eigensolver import ConvergenceError, SolverOptions
from .gaussian_ising import GaussianError
from .hamiltonian import DEFAULT_COUPLINGS, ModelError, ModelSpec
from .hilbert import SectorError
from .lattice import (
    Family,
    Lattice,
    LatticeError,
    SublatticePartition,
    auto_partition,
    make_partition,
    make_preset_lattice,
    parse_site_list,
    preset_partition,
)
from .sweep import (
    PointCache,
    SweepError,
    Thresholds,
    atomic_write_text,
    curve_to_csv,
    derivative,
    detect_transitions,
    fingerprint,
    hubbard_phase_scan,
    make_grid,
    parse_grid,
    run_sweep,
    solve_point,
)

log = logging.getLogger("entroscope")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

CONFIG_KEYS = {"model", "size", "lattice", "couplings", "sweep", "partition", "method",
               "jordan_wigner", "solver", "thresholds", "output"}
SWEEP_KEYS = {"param", "grid"}
THRESHOLD_KEYS = {"curve", "derivative", "relative"}
OUTPUT_KEYS = {"dir", "stem"}
METHODS = ("auto", "ed", "gaussian")

DEFAULT_SWEEPS: dict[Family, tuple[str, tuple[float, float, float]]] = {
    Family.ISING_CHAIN: ("lambda", (0.0, 2.0, 0.02)),
    Family.DIMER_2D: ("lambda", (0.025, 1.0, 0.025)),
    Family.J1J2_2D: ("J2", (0.0, 1.0, 0.01)),
    Family.CHECKERBOARD_2D: ("Jx", (0.5, 1.5, 0.01)),
    Family.HUBBARD_CHAIN: ("V", (0.0, 4.0, 0.05)),
}

RUNTIME_ERRORS = (SweepError, ConvergenceError, GaussianError, SectorError, ModelError, LatticeError,
                  np.linalg.LinAlgError)


class ConfigError(ValueError):
    """Invalid configuration; ``str()`` is the line-anchored message."""

    def __init__(self, message: str, source: str = "<config>", line: int | None = None):
        self.message, self.source, self.line = message, source, line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


@dataclass
class RunConfig:
    spec: ModelSpec
    param: str
    grid: np.ndarray
    partition: SublatticePartition
    method: str = "auto"
    jordan_wigner: bool = False
    solver: SolverOptions = field(default_factory=SolverOptions)
    thresholds: Thresholds = field(default_factory=Thresholds)
    out_dir: Path = Path(".")
    stem: str = "sweep"

    def canonical(self) -> dict:
        """Everything that determines the results; output paths excluded."""
        return {
            "model": self.spec.to_dict(),
            "sweep": {"param": self.param, "grid": [float(x) for x in self.grid]},
            "partition": list(self.partition.r_sites),
            "method": self.method,
            "jordan_wigner": self.jordan_wigner,
            "solver": vars(self.solver),
            "thresholds": vars(self.thresholds),
        }

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.canonical())


# ---------------------------------------------------------------------------
# config parsing


class _Locator:
    """Maps a config key to the first source line that mentions it."""

    def __init__(self, text: str, source: str):
        self.lines = text.splitlines()
        self.source = source

    def line(self, *keys: str) -> int | None:
        for key in keys:
            pat = re.compile(r'"' + re.escape(key) + r'"\s*:')
            for n, text in enumerate(self.lines, 1):
                if pat.search(text):
                    return n
        return None

    def error(self, message: str, *keys: str) -> ConfigError:
        return ConfigError(message, self.source, self.line(*keys) or 1)


def _check_keys(obj, allowed: set[str], where: str, loc: _Locator, anchor: str) -> dict:
    if not isinstance(obj, dict):
        raise loc.error(f"{where} must be a JSON object", anchor)
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise loc.error(f"unknown key {unknown[0]!r} in {where}; allowed: {sorted(allowed)}", unknown[0])
    return obj


def _parse_grid_value(value, loc: _Locator) -> np.ndarray:
    try:
        if isinstance(value, str):
            return parse_grid(value)
        if isinstance(value, dict) and set(value) == {"lo", "hi", "step"}:
            return make_grid(float(value["lo"]), float(value["hi"]), float(value["step"]))
        if isinstance(value, list) and len(value) == 3:
            return make_grid(*(float(v) for v in value))
    except (TypeError, ValueError) as exc:
        raise loc.error(str(exc), "grid") from exc
    raise loc.error('grid must be "lo:hi:step", [lo, hi, step] or {"lo", "hi", "step"}', "grid")


def check_balanced(partition: SublatticePartition) -> SublatticePartition:
    if not partition.is_balanced:
        raise LatticeError(f"balanced bipartition required: R has {len(partition.r_sites)} "
                           f"of {partition.num_sites} sites")
    return partition


def _build_partition(value, lattice: Lattice, loc: _Locator) -> SublatticePartition:
    try:
        if value is None or value == "preset":
            part = preset_partition(lattice)
        elif value == "auto":
            part = auto_partition(lattice)
        elif isinstance(value, str):
            part = make_partition(lattice, parse_site_list(value))
        elif isinstance(value, list) and all(isinstance(s, int) and not isinstance(s, bool) for s in value):
            part = make_partition(lattice, value)
        else:
            raise LatticeError('partition must be a list of site indices, "preset" or "auto"')
        return check_balanced(part)
    except (LatticeError, ValueError) as exc:
        raise loc.error(str(exc), "partition") from exc


def _build_lattice(cfg: dict, family: Family, loc: _Locator) -> Lattice:
    if ("size" in cfg) == ("lattice" in cfg):
        raise loc.error("give exactly one of 'size' or 'lattice'", "size", "lattice", "model")
    try:
        if "lattice" in cfg:
            lat = Lattice.from_dict(cfg["lattice"])
            if lat.family is None:
                lat = Lattice.from_dict({**lat.to_dict(), "family": family.value})
            return lat
        return make_preset_lattice(family, cfg["size"])
    except (LatticeError, KeyError, TypeError, ValueError) as exc:
        raise loc.error(f"bad lattice: {exc}", "lattice", "size") from exc


def parse_config(text: str, source: str = "<config>", *, overrides: dict | None = None) -> RunConfig:
    """Validate a sweep config.

    ``overrides`` carries command-line values (``partition``, ``grid``,
    ``out``) that take precedence over the file.
    """
    overrides = overrides or {}
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", source, exc.lineno) from exc
    loc = _Locator(text, source)
    _check_keys(cfg, CONFIG_KEYS, "config", loc, "model")
    if "model" not in cfg:
        raise ConfigError("missing required key 'model'", source, 1)
    try:
        family = Family(cfg["model"])
    except ValueError:
        raise loc.error(f"unknown model {cfg['model']!r}; choose from {[f.value for f in Family]}", "model") from None
    lattice = _build_lattice(cfg, family, loc)

    couplings = cfg.get("couplings", {})
    if not isinstance(couplings, dict):
        raise loc.error("couplings must be a JSON object", "couplings")
    try:
        spec = ModelSpec(family, lattice, couplings)
    except (ModelError, TypeError, ValueError) as exc:
        raise loc.error(str(exc), "couplings") from exc

    default_param, default_grid = DEFAULT_SWEEPS[family]
    sweep = _check_keys(cfg.get("sweep", {}), SWEEP_KEYS, "sweep", loc, "sweep")
    param = sweep.get("param", default_param)
    if param not in DEFAULT_COUPLINGS[family]:
        raise loc.error(f"{family.value} has no coupling {param!r}; choose from {sorted(DEFAULT_COUPLINGS[family])}",
                        "param", "sweep")
    if "grid" in overrides:
        try:
            grid = parse_grid(overrides["grid"])
        except ValueError as exc:
            raise ConfigError(str(exc), "--grid") from exc
    elif "grid" in sweep:
        grid = _parse_grid_value(sweep["grid"], loc)
    else:
        grid = make_grid(*default_grid)
    if len(grid) < 5:
        raise loc.error(f"a sweep needs at least 5 grid points, got {len(grid)}", "grid", "sweep")

    if "partition" in overrides:
        try:
            partition = check_balanced(make_partition(lattice, parse_site_list(overrides["partition"])))
        except (LatticeError, ValueError) as exc:
            raise ConfigError(str(exc), "--partition") from exc
    else:
        partition = _build_partition(cfg.get("partition"), lattice, loc)

    method = cfg.get("method", "auto")
    if method not in METHODS:
        raise loc.error(f"method must be one of {list(METHODS)}, got {method!r}", "method")
    if method == "gaussian" and family is not Family.ISING_CHAIN:
        raise loc.error("method 'gaussian' is only available for ISING_CHAIN", "method")
    jw = cfg.get("jordan_wigner", False)
    if not isinstance(jw, bool):
        raise loc.error("jordan_wigner must be true or false", "jordan_wigner")

    try:
        solver = SolverOptions.from_dict(cfg.get("solver"))
    except (TypeError, ValueError) as exc:
        raise loc.error(str(exc), "solver") from exc
    th = _check_keys(cfg.get("thresholds", {}), THRESHOLD_KEYS, "thresholds", loc, "thresholds")
    try:
        thresholds = Thresholds(**th)
    except TypeError as exc:
        raise loc.error(str(exc), "thresholds") from exc

    out = _check_keys(cfg.get("output", {}), OUTPUT_KEYS, "output", loc, "output")
    out_dir = Path(overrides.get("out") or out.get("dir", "."))
    stem = out.get("stem") or (Path(source).stem if source != "<config>" else "sweep")
    return RunConfig(spec, param, grid, partition, method, jw, solver, thresholds, out_dir, stem)


def load_config(path: str | os.PathLike, **overrides) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from exc
    return parse_config(text, str(path), overrides={k: v for k, v in overrides.items() if v is not None})


# ---------------------------------------------------------------------------
# commands


def default_cache_dir() -> Path:
    env = os.environ.get("ENTROSCOPE_CACHE")
    if env:
        return Path(env)
    base = os.environ.get("XDG_CACHE_HOME") or Path.home() / ".cache"
    return Path(base) / "entroscope"


def _cache(args) -> PointCache | None:
    return None if args.no_cache else PointCache(default_cache_dir())


def build_report(cfg: RunConfig, curve, report) -> dict:
    out = report.to_dict()
    out.update({
        "config_fingerprint": cfg.fingerprint,
        "model": cfg.spec.family.value,
        "num_sites": cfg.spec.lattice.num_sites,
        "couplings": {k: v for k, v in sorted(cfg.spec.couplings.items()) if k != cfg.param},
        "partition": list(cfg.partition.r_sites),
        "grid": {"lo": float(cfg.grid[0]), "hi": float(cfg.grid[-1]), "points": len(cfg.grid)},
        "degenerate_points": [float(x) for x, d in zip(curve.grid, curve.degenerate) if d],
    })
    return out


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, partition=args.partition, grid=args.grid, out=args.out)
    log.info("sweeping %s over %d points (fingerprint %s)", cfg.param, len(cfg.grid), cfg.fingerprint)
    curve = run_sweep(cfg.spec, cfg.param, cfg.grid, cfg.partition, method=cfg.method,
                      jordan_wigner=cfg.jordan_wigner, opts=cfg.solver, cache=_cache(args),
                      workers=args.threads)
    deriv = derivative(curve)
    report = detect_transitions(curve, deriv, cfg.thresholds)
    csv_path = cfg.out_dir / f"{cfg.stem}.csv"
    report_path = cfg.out_dir / f"{cfg.stem}.report.json"
    atomic_write_text(csv_path, curve_to_csv(curve, deriv))
    atomic_write_text(report_path, json.dumps(build_report(cfg, curve, report), indent=2, sort_keys=True) + "\n")
    for c in report.candidates:
        print(f"order {c.order} {c.extremum_kind} at {cfg.param}={c.location:g} (prominence {c.prominence:.3g})")
    print(f"wrote {csv_path} and {report_path}")
    return EXIT_OK


def _parse_set(items: list[str]) -> dict[str, float]:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"expected name=value, got {item!r}", "--set")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"coupling {name!r} needs a number, got {value!r}", "--set") from None
    return out


def cmd_point(args) -> int:
    if args.config:
        cfg = load_config(args.config, partition=args.partition)
        spec, partition, method, jw, opts = cfg.spec, cfg.partition, cfg.method, cfg.jordan_wigner, cfg.solver
        try:
            spec = ModelSpec(spec.family, spec.lattice, {**spec.couplings, **_parse_set(args.set)})
        except ModelError as exc:
            raise ConfigError(str(exc), "--set") from exc
    else:
        if not args.model:
            raise ConfigError("give --config or --model", "point")
        try:
            family = Family(args.model)
        except ValueError:
            raise ConfigError(f"unknown model {args.model!r}", "--model") from None
        try:
            if args.lattice:
                lattice = Lattice.from_json(Path(args.lattice).read_text(encoding="utf-8"))
            elif args.size:
                size = [int(s) for s in args.size.lower().split("x")]
                lattice = make_preset_lattice(family, size[0] if len(size) == 1 else size)
            else:
                raise ConfigError("give --size or --lattice", "point")
        except (LatticeError, OSError, KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad lattice: {exc}", "--lattice" if args.lattice else "--size") from exc
        try:
            spec = ModelSpec(family, lattice, _parse_set(args.set))
        except ModelError as exc:
            raise ConfigError(str(exc), "--set") from exc
        try:
            if args.partition:
                partition = make_partition(lattice, parse_site_list(args.partition))
            else:
                partition = preset_partition(lattice)
            check_balanced(partition)
        except (LatticeError, ValueError) as exc:
            raise ConfigError(str(exc), "--partition") from exc
        method, jw, opts = args.method, args.jordan_wigner, SolverOptions()
    rec = solve_point(spec, partition, method=method, jordan_wigner=jw, opts=opts)
    print(json.dumps({k: rec[k] for k in ("energy", "gap", "entropy_bits")}))
    return EXIT_OK


def cmd_hubbard(args) -> int:
    try:
        U_values = [float(u) for u in args.U.split(",")]
        V_grid = parse_grid(args.grid or "0:4:0.05")
        partition = None
        if args.partition:
            lattice = make_preset_lattice(Family.HUBBARD_CHAIN, args.N)
            partition = check_balanced(make_partition(lattice, parse_site_list(args.partition)))
    except (LatticeError, ValueError) as exc:
        raise ConfigError(str(exc), "hubbard") from exc
    rows = hubbard_phase_scan(U_values, V_grid, args.N, partition=partition, cache=_cache(args),
                              workers=args.threads)
    lines = ["U,V_first_order,V_lower,V_upper,width"]
    fmt = lambda x: "" if x is None else repr(float(x))  # noqa: E731
    for r in rows:
        lines.append(",".join([fmt(r.U), fmt(r.first_order), fmt(r.lower), fmt(r.upper), fmt(r.width)]))
    text = "\n".join(lines) + "\n"
    if args.out:
        path = Path(args.out) / f"hubbard_N{args.N}.csv"
        atomic_write_text(path, text)
        print(f"wrote {path}")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validate import run_all

    results = run_all()
    for r in results:
        print(f"{r.line()} [{r.seconds:.1f}s]")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="entroscope", description="Sublattice entropy sweeps for small lattice models.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sweep", help="run a coupling sweep from a JSON config")
    sp.add_argument("--config", required=True, metavar="PATH")
    sp.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
    sp.add_argument("--threads", type=int, default=1, metavar="K")
    sp.add_argument("--partition", metavar="I,J,...", help="subsystem sites (overrides config)")
    sp.add_argument("--grid", metavar="LO:HI:STEP", help="sweep grid (overrides config)")
    sp.add_argument("--no-cache", action="store_true", help="neither read nor write the point cache")
    sp.set_defaults(func=cmd_sweep)

    pp = sub.add_parser("point", help="solve a single coupling point and print JSON")
    pp.add_argument("--config", metavar="PATH")
    pp.add_argument("--model", choices=[f.value for f in Family])
    pp.add_argument("--size", help="chain length N or LxL")
    pp.add_argument("--lattice", metavar="PATH", help="lattice JSON file")
    pp.add_argument("--set", action="append", metavar="NAME=VALUE", help="coupling value (repeatable)")
    pp.add_argument("--partition", metavar="I,J,...")
    pp.add_argument("--method", choices=METHODS, default="auto")
    pp.add_argument("--jordan-wigner", action="store_true")
    pp.set_defaults(func=cmd_point)

    hp = sub.add_parser("hubbard", help="extended Hubbard boundary scan over V at fixed U values")
    hp.add_argument("--N", type=int, default=6)
    hp.add_argument("--U", default="2,4,6", help="comma-separated U values")
    hp.add_argument("--grid", metavar="LO:HI:STEP", help="V grid (default 0:4:0.05)")
    hp.add_argument("--partition", metavar="I,J,...")
    hp.add_argument("--out", metavar="DIR")
    hp.add_argument("--threads", type=int, default=1, metavar="K")
    hp.add_argument("--no-cache", action="store_true")
    hp.set_defaults(func=cmd_hubbard)

    vp = sub.add_parser("validate", help="run the oracle suite")
    vp.set_defaults(func=cmd_validate)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())

"""Batch driver: config -> boundary data -> continuation -> CSV/JSON artifacts.

Layout of an output directory::

    report.json
    k=<k>/fields.csv     i_x,i_y,x,y,F1,F2,F3,F4
    k=<k>/moduli.csv     component,axis,h,raw,renormalized

Exit status: 0 when every stage converged, 2 on a bad configuration
(including a grid too coarse for the midpoint update), 3 when a solver stage
did not converge (artifacts are still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .core import BoundaryTrace, Grid, SolverParams
from .diagnostics import DiagnosticsReport
from .errors import BroadwellError
from .fixed_point import continuation, damping_continuation

log = logging.getLogger(__name__)

FIELDS_HEADER = ("i_x", "i_y", "x", "y", "F1", "F2", "F3", "F4")
MODULI_HEADER = ("component", "axis", "h", "raw", "renormalized")
BOUNDARY_HEADER = ("fb1", "fb2", "fb3", "fb4")
EMIT_CHOICES = ("fields", "report", "moduli")
TOLERANCE_KEYS = ("tol_inner", "tol_outer", "tol_bracket", "max_inner", "max_outer", "max_bracket")
BOUNDARY_KINDS = ("constant", "step", "power", "random", "file")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


class ConfigError(ValueError):
    pass


def fmt(v: float) -> str:
    """17 significant digits: round-trips every double."""
    return format(float(v), ".17g")


@dataclass
class RunConfig:
    grid: int = 16
    k_schedule: list = field(default_factory=lambda: [8.0])
    alpha_schedule: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    boundary: dict = field(default_factory=lambda: {"kind": "constant", "values": 0.5})
    out: str = "out"
    emit: list = field(default_factory=lambda: list(EMIT_CHOICES))
    seed: int = 0
    scheme: str = "midpoint"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if isinstance(self.grid, bool) or not isinstance(self.grid, int) or self.grid < 2:
            raise ConfigError(f"grid must be an integer >= 2, got {self.grid!r}")
        if not self.k_schedule:
            raise ConfigError("k_schedule must be nonempty")
        self.k_schedule = [float(v) for v in self.k_schedule]
        self.alpha_schedule = [float(v) for v in self.alpha_schedule]
        unknown = set(self.tolerances) - set(TOLERANCE_KEYS)
        if unknown:
            raise ConfigError(f"unknown tolerance keys: {sorted(unknown)}")
        bad_emit = set(self.emit) - set(EMIT_CHOICES)
        if bad_emit:
            raise ConfigError(f"unknown emit flags: {sorted(bad_emit)}")
        if not isinstance(self.boundary, dict) or self.boundary.get("kind") not in BOUNDARY_KINDS:
            raise ConfigError(f"boundary.kind must be one of {BOUNDARY_KINDS}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        try:
            self.params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def params(self) -> SolverParams:
        return SolverParams(k=self.k_schedule[0], k_schedule=tuple(self.k_schedule),
                            alpha_schedule=tuple(self.alpha_schedule), scheme=self.scheme,
                            **self.tolerances)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(d)


def _per_component(v, name) -> np.ndarray:
    a = np.broadcast_to(np.asarray(v, dtype=float), (4,))
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"boundary.{name} must be finite")
    return a


def make_boundary(spec: dict, grid: Grid | int, seed: int = 0,
                  base_dir: Path | None = None) -> BoundaryTrace:
    """Sample a boundary profile at cell centers.

    kinds: ``constant`` (``values``), ``step`` (``low`` below ``at``, ``high``
    from it on), ``power`` (``scale * s**exponent``), ``random`` (seeded
    uniform, rescaled to total ``mass``), ``file`` (CSV with header
    ``fb1,fb2,fb3,fb4`` and one row per cell).  Scalars apply to all four
    traces; lists give one value per trace.
    """
    grid = grid if isinstance(grid, Grid) else Grid(grid)
    n = grid.n_cells
    s = grid.centers
    kind = spec.get("kind")
    if kind == "constant":
        v = _per_component(spec.get("values", 0.0), "values")
        data = np.repeat(v[:, None], n, axis=1)
    elif kind == "step":
        low = _per_component(spec.get("low", 0.0), "low")
        high = _per_component(spec.get("high", 1.0), "high")
        at = float(spec.get("at", 0.5))
        data = np.where(s[None, :] < at, low[:, None], high[:, None])
    elif kind == "power":
        p = _per_component(spec.get("exponent", 1.0), "exponent")
        scale = _per_component(spec.get("scale", 1.0), "scale")
        data = scale[:, None] * s[None, :] ** p[:, None]
    elif kind == "random":
        m = float(spec.get("mass", 1.0))
        if not (math.isfinite(m) and m >= 0):
            raise ConfigError("boundary.mass must be finite and >= 0")
        data = np.random.default_rng(seed).uniform(0.0, 1.0, size=(4, n))
        data *= m / (data.sum() / n)
    elif kind == "file":
        path = Path(spec["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        data = read_boundary_csv(path).data
        if data.shape[1] != n:
            raise ConfigError(f"{path}: {data.shape[1]} rows, grid has {n} cells")
    else:
        raise ConfigError(f"unknown boundary kind {kind!r}")
    if not np.all(np.isfinite(data)) or np.any(data < 0):
        raise ConfigError(f"boundary kind {kind!r} produced negative or non-finite samples")
    return BoundaryTrace(*data)


def read_boundary_csv(path) -> BoundaryTrace:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(c.strip() for c in rows[0]) != BOUNDARY_HEADER:
        raise ConfigError(f"{path}: header must be {','.join(BOUNDARY_HEADER)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != 4:
        raise ConfigError(f"{path}: every row needs four values")
    if not np.all(np.isfinite(data)) or np.any(data < 0):
        raise ConfigError(f"{path}: samples must be finite and nonnegative")
    return BoundaryTrace(*data.T)


def k_dirname(k: float) -> str:
    return f"k={float(k)!r}"


def write_fields_csv(path, F) -> None:
    n = F.n_cells
    c = (np.arange(n) + 0.5) / n
    with open(path, "w", newline="") as fh:
        fh.write(",".join(FIELDS_HEADER) + "\n")
        for ix in range(n):
            for iy in range(n):
                vals = [fmt(c[ix]), fmt(c[iy])] + [fmt(F.data[j, ix, iy]) for j in range(4)]
                fh.write(f"{ix},{iy}," + ",".join(vals) + "\n")


def read_fields_csv(path):
    """Inverse of :func:`write_fields_csv`; returns a ``FieldQuartet``."""
    from .core import FieldQuartet

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != FIELDS_HEADER:
        raise ValueError(f"{path}: unexpected header {rows[0]}")
    body = rows[1:]
    n = math.isqrt(len(body))
    if n * n != len(body):
        raise ValueError(f"{path}: {len(body)} rows is not a square grid")
    data = np.empty((4, n, n))
    for r in body:
        ix, iy = int(r[0]), int(r[1])
        data[:, ix, iy] = [float(v) for v in r[4:8]]
    return FieldQuartet(data)


def write_moduli_csv(path, diag: DiagnosticsReport) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(MODULI_HEADER) + "\n")
        for comp, axis, h, raw, ren in diag.moduli_rows():
            fh.write(f"{comp},{axis},{fmt(h)},{fmt(raw)},{fmt(ren)}\n")


def read_moduli_csv(path) -> list[tuple[int, str, float, float, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != MODULI_HEADER:
        raise ValueError(f"{path}: unexpected header {rows[0]}")
    return [(int(r[0]), r[1], float(r[2]), float(r[3]), float(r[4])) for r in rows[1:]]


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        # strict JSON has no inf/nan
        return v if math.isfinite(v) else str(v)
    return v


def write_report(path, report: dict) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")


def read_report(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def run(config: RunConfig, base_dir: Path | None = None) -> int:
    """Execute one configured run; returns the exit status."""
    try:
        fb = make_boundary(config.boundary, Grid(config.grid), config.seed, base_dir)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        log.error("boundary: %s", exc)
        return EXIT_CONFIG
    params = config.params()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {"config": config.to_dict(),
              "boundary": {"mass": fb.mass, "entropy": fb.entropy, "n_cells": fb.n_cells},
              "stages": [], "damping": []}
    converged = True
    try:
        steps = continuation(fb, params)
        for st in steps:
            kdir = out / k_dirname(st.k)
            if {"fields", "moduli"} & set(config.emit):
                kdir.mkdir(exist_ok=True)
            if "fields" in config.emit:
                write_fields_csv(kdir / "fields.csv", st.fields)
            if "moduli" in config.emit:
                write_moduli_csv(kdir / "moduli.csv", st.diagnostics)
            converged &= st.report.converged
            report["stages"].append({"k": st.k, "solve": st.report.to_dict(),
                                     "diagnostics": st.diagnostics.to_flat(),
                                     "cauchy_increment": st.increment})
        if params.alpha_schedule:
            last = params.replace(k=params.k_schedule[-1])
            for d in damping_continuation(fb, last, reference=steps[-1].fields):
                converged &= d.report.converged
                report["damping"].append({"alpha": d.alpha, "distance": d.distance,
                                          "solve": d.report.to_dict()})
    except BroadwellError as exc:
        log.error("solver: %s", exc)
        report["error"] = str(exc)
        converged = False
    except ValueError as exc:
        # grid too coarse for the midpoint update
        log.error("solver: %s", exc)
        report["error"] = str(exc)
        if "report" in config.emit:
            write_report(out / "report.json", report)
        return EXIT_CONFIG
    report["converged"] = converged
    if "report" in config.emit:
        write_report(out / "report.json", report)
    return EXIT_OK if converged else EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="broadwell",
                                 description="Solve the truncated stationary Broadwell system "
                                             "and write fields and diagnostics.")
    ap.add_argument("--config", type=Path, help="JSON run configuration")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--grid", type=int, help="cells per axis")
    ap.add_argument("--k", help="comma-separated k schedule (overrides the config)")
    ap.add_argument("--seed", type=int, help="seed for random boundary data")
    ap.add_argument("--emit", help="comma-separated subset of fields,report,moduli")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args) -> RunConfig:
    d = {}
    if args.config is not None:
        text = args.config.read_text()
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: line {exc.lineno}, column {exc.colno}: "
                              f"{exc.msg}") from None
        if not isinstance(d, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
    if args.out is not None:
        d["out"] = args.out
    if args.grid is not None:
        d["grid"] = args.grid
    if args.seed is not None:
        d["seed"] = args.seed
    if args.k is not None:
        try:
            d["k_schedule"] = [float(v) for v in args.k.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"--k: cannot parse {args.k!r}") from None
    if args.emit is not None:
        d["emit"] = [v.strip() for v in args.emit.split(",") if v.strip()]
    return RunConfig.from_dict(d)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    base = args.config.parent if args.config is not None else None
    return run(config, base)


if __name__ == "__main__":
    sys.exit(main())

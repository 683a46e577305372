"""Experiment drivers and command-line entry point.

Three experiments are shipped, each runnable with the Allen-Cahn or the
hybrid parameter mapping on (-3, 3)^2:

  quasi1d   - a straight two-front slab driven by a constant force
              (C = 1/2); also runs the matching 1D cross-section problem
              on (-3, 3).
  circle    - a disk shrinking by curvature (C = 0), comparable to the
              sharp-interface area law.
  nonconvex - a plus-shaped region with convex and non-convex corners
              (C = 0).

Every run writes one diagnostics CSV row per time step (columns
step,time,energy,area,fp_iterations,dissipation_residual) plus legacy
VTK snapshots of the field at a configurable stride.  Identical
configurations produce byte-identical CSV files.
"""

import argparse
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from .diagnostics import phase_area, wave_speed_constant
from .fem import energy
from .mesh import Mesh, build_interval_mesh, build_rect_mesh
from .model import ModelParams, allen_cahn_params, hybrid_params
from .stepper import FixedPointError, LinearSolveError, StepConfig, advance

EXPERIMENTS = ("quasi1d", "circle", "nonconvex")
MODELS = ("allen_cahn", "hybrid")
CSV_HEADER = "step,time,energy,area,fp_iterations,dissipation_residual"
OUTDIR_ENV = "PHASEFIELD_OUTDIR"

_T_END = {"quasi1d": 1.5, "circle": 3.0, "nonconvex": 1.5}
_FORCE = {"quasi1d": 0.5, "circle": 0.0, "nonconvex": 0.0}
_DOMAIN = (-3.0, 3.0)


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One CSV row; fields are builtin types so repr round-trips."""

    step: int
    time: float
    energy: float
    area: float
    fp_iterations: int
    dissipation_residual: float

    def __post_init__(self):
        object.__setattr__(self, "step", int(self.step))
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "energy", float(self.energy))
        object.__setattr__(self, "area", float(self.area))
        object.__setattr__(self, "fp_iterations", int(self.fp_iterations))
        object.__setattr__(self, "dissipation_residual",
                           float(self.dissipation_residual))

    def to_csv_row(self) -> str:
        return (f"{self.step},{self.time!r},{self.energy!r},{self.area!r},"
                f"{self.fp_iterations},{self.dissipation_residual!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one experiment invocation."""

    experiment: str
    model: str = "allen_cahn"
    mu: float = 0.1
    lam: float = 0.1
    nu: float = 0.1
    force_slope: float | None = None  # None: experiment default
    delta: float = 1e-2
    nx: int = 120
    ny: int = 120
    tau: float = 1e-3
    t_end: float | None = None        # None: experiment default
    snapshot_stride: int = 100
    outdir: str = "out"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if min(self.mu, self.lam, self.nu, self.tau) <= 0:
            raise ValueError("mu, lam, nu and tau must be positive")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("nx and ny must be positive")
        if self.t_end is not None and self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be positive")

    @property
    def resolved_t_end(self) -> float:
        return _T_END[self.experiment] if self.t_end is None else self.t_end

    @property
    def resolved_force_slope(self) -> float:
        return _FORCE[self.experiment] if self.force_slope is None else self.force_slope

    def n_steps(self) -> int:
        return int(round(self.resolved_t_end / self.tau))

    def model_params(self) -> ModelParams:
        if self.model == "allen_cahn":
            return allen_cahn_params(self.mu, self.lam, wave_speed_constant(),
                                     self.resolved_force_slope)
        return hybrid_params(self.nu, self.delta, self.resolved_force_slope)


@dataclass
class RunResult:
    """Diagnostics of one mesh-level run (2D primary or 1D cross-section)."""

    mesh: Mesh
    records: list[DiagnosticsRecord]
    snapshots: list[tuple[int, float, np.ndarray]]
    final: np.ndarray
    csv_path: str


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    primary: RunResult
    cross_section: RunResult | None
    status: int
    error: str | None = None


def initial_condition(experiment: str, mesh: Mesh) -> np.ndarray:
    """Nodal interpolant of the experiment's characteristic function.

    quasi1d uses |x| <= 3/2 (boundary vertices inside), circle the open
    disk x^2 + y^2 < 9/4 (boundary vertices outside), nonconvex a closed
    plus-shaped region.
    """
    v = mesh.vertices
    x = v[:, 0]
    if experiment == "quasi1d":
        inside = np.abs(x) <= 1.5
    elif experiment == "circle":
        if mesh.dim != 2:
            raise ValueError("circle experiment needs a 2D mesh")
        inside = x ** 2 + v[:, 1] ** 2 < 2.25
    elif experiment == "nonconvex":
        if mesh.dim != 2:
            raise ValueError("nonconvex experiment needs a 2D mesh")
        y = v[:, 1]
        bar_h = (np.abs(x) <= 2.0) & (np.abs(y) <= 2.0 / 3.0)
        bar_v = (np.abs(x) <= 2.0 / 3.0) & (np.abs(y) <= 2.0)
        inside = bar_h | bar_v
    else:
        raise ValueError(f"unknown experiment {experiment!r}")
    return inside.astype(float)


def write_csv(records, path: str) -> None:
    """Write diagnostics records; header row always present."""
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for r in records:
                fh.write(r.to_csv_row() + "\n")
    except OSError as err:
        raise OSError(f"cannot write CSV {path}: {err}") from err


def read_csv(path: str) -> list[DiagnosticsRecord]:
    """Parse a diagnostics CSV written by write_csv."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header in {path}: {header!r}")
        records = []
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != 6:
                raise ValueError(f"malformed CSV row in {path}: {line!r}")
            records.append(DiagnosticsRecord(
                step=int(parts[0]), time=float(parts[1]),
                energy=float(parts[2]), area=float(parts[3]),
                fp_iterations=int(parts[4]),
                dissipation_residual=float(parts[5])))
    return records


_VTK_CELL_TYPE = {1: 3, 2: 5}  # line / triangle


def write_vtk_snapshot(mesh: Mesh, values: np.ndarray, path: str) -> None:
    """Legacy ASCII unstructured-grid file with one point scalar "S"."""
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_vertices,):
        raise ValueError("field length does not match the mesh")
    pts = np.zeros((mesh.n_vertices, 3))
    pts[:, :mesh.dim] = mesh.vertices
    k = mesh.dim + 1
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("# vtk DataFile Version 2.0\n")
            fh.write("phasefield snapshot\n")
            fh.write("ASCII\n")
            fh.write("DATASET UNSTRUCTURED_GRID\n")
            fh.write(f"POINTS {mesh.n_vertices} double\n")
            for p in pts:
                fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
            fh.write(f"CELLS {mesh.n_elements} {mesh.n_elements * (k + 1)}\n")
            for cell in mesh.elements:
                fh.write(f"{k} " + " ".join(str(int(i)) for i in cell) + "\n")
            fh.write(f"CELL_TYPES {mesh.n_elements}\n")
            cell_type = _VTK_CELL_TYPE[mesh.dim]
            for _ in range(mesh.n_elements):
                fh.write(f"{cell_type}\n")
            fh.write(f"POINT_DATA {mesh.n_vertices}\n")
            fh.write("SCALARS S double\n")
            fh.write("LOOKUP_TABLE default\n")
            for s in values:
                fh.write(f"{s:.17g}\n")
    except OSError as err:
        raise OSError(f"cannot write VTK snapshot {path}: {err}") from err


def _run_single(mesh: Mesh, s0: np.ndarray, params: ModelParams,
                cfg: ExperimentConfig, rundir: str, tag: str) -> tuple[RunResult, str | None]:
    """Advance one mesh to t_end, streaming CSV rows and snapshots.

    On solver failure the partial CSV is kept, a .failed marker with the
    step index is written next to it, and the error text is returned.
    """
    suffix = f"_{tag}" if tag else ""
    csv_path = os.path.join(rundir, f"diagnostics{suffix}.csv")
    step_cfg = StepConfig(tau=cfg.tau)
    n_steps = cfg.n_steps()

    records = [DiagnosticsRecord(
        step=0, time=0.0, energy=energy(mesh, s0, params),
        area=phase_area(mesh, s0, 0.5), fp_iterations=0,
        dissipation_residual=0.0)]
    snapshots = [(0, 0.0, s0.copy())]

    def snapshot_path(n):
        return os.path.join(rundir, f"snapshot{suffix}_{n:06d}.vtk")

    write_vtk_snapshot(mesh, s0, snapshot_path(0))
    error = None
    final = s0
    with open(csv_path, "w", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        fh.write(records[0].to_csv_row() + "\n")

        def observer(n, t, state, report):
            nonlocal final
            final = state
            rec = DiagnosticsRecord(
                step=n, time=t, energy=report.energy_after,
                area=phase_area(mesh, state, 0.5),
                fp_iterations=report.fp_iterations,
                dissipation_residual=report.dissipation_identity_residual)
            records.append(rec)
            fh.write(rec.to_csv_row() + "\n")
            if n % cfg.snapshot_stride == 0 or n == n_steps:
                snapshots.append((n, t, state.copy()))
                write_vtk_snapshot(mesh, state, snapshot_path(n))
                fh.flush()

        try:
            final = advance(mesh, s0, params, step_cfg, n_steps, observer)
        except (FixedPointError, LinearSolveError) as err:
            error = str(err)
            with open(csv_path + ".failed", "w") as marker:
                marker.write(error + "\n")
    return RunResult(mesh=mesh, records=records, snapshots=snapshots,
                     final=np.array(final), csv_path=csv_path), error


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run one configured experiment, writing CSV and VTK output.

    quasi1d also runs the 1D cross-section problem with the same
    parameters; its diagnostics carry the "_1d" suffix.
    """
    rundir = os.path.join(cfg.outdir, f"{cfg.experiment}_{cfg.model}")
    os.makedirs(rundir, exist_ok=True)
    params = cfg.model_params()

    mesh2 = build_rect_mesh(_DOMAIN[0], _DOMAIN[1], _DOMAIN[0], _DOMAIN[1],
                            cfg.nx, cfg.ny)
    s0 = initial_condition(cfg.experiment, mesh2)
    primary, error = _run_single(mesh2, s0, params, cfg, rundir, tag="")

    cross = None
    if cfg.experiment == "quasi1d" and error is None:
        mesh1 = build_interval_mesh(_DOMAIN[0], _DOMAIN[1], cfg.nx)
        s0_1d = initial_condition(cfg.experiment, mesh1)
        cross, error = _run_single(mesh1, s0_1d, params, cfg, rundir, tag="1d")

    return ExperimentResult(config=cfg, primary=primary, cross_section=cross,
                            status=0 if error is None else 1, error=error)


def _parse_config_file(path: str) -> dict:
    """Flat key=value lines; blank lines and # comments are ignored."""
    overrides = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            overrides[key] = value
    return overrides


_FIELD_PARSERS = {
    "model": str,
    "mu": float,
    "lam": float,
    "nu": float,
    "force_slope": float,
    "delta": float,
    "nx": int,
    "ny": int,
    "tau": float,
    "t_end": float,
    "snapshot_stride": int,
    "outdir": str,
}
_KEY_ALIASES = {"lambda": "lam"}


def build_config(experiment: str, config_file: str | None = None,
                 cli_overrides: dict | None = None) -> ExperimentConfig:
    """Merge defaults, config file, environment and CLI flags (last wins)."""
    cfg = ExperimentConfig(experiment=experiment)
    if config_file:
        for key, raw in _parse_config_file(config_file).items():
            key = _KEY_ALIASES.get(key, key)
            if key == "experiment":
                continue
            if key not in _FIELD_PARSERS:
                raise ValueError(f"unknown config key {key!r}")
            cfg = replace(cfg, **{key: _FIELD_PARSERS[key](raw)})
    env_outdir = os.environ.get(OUTDIR_ENV)
    if env_outdir:
        cfg = replace(cfg, outdir=env_outdir)
    for key, value in (cli_overrides or {}).items():
        if value is not None:
            cfg = replace(cfg, **{key: value})
    return cfg


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasefield",
        description="Energy-stable finite element solver for Allen-Cahn "
                    "type gradient flows")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, blurb in (
            ("quasi1d", "force-driven straight fronts plus 1D cross-section"),
            ("circle", "disk shrinking by mean curvature"),
            ("nonconvex", "plus-shaped region with corners of both signs")):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--model", choices=MODELS, default=None)
        p.add_argument("--mu", type=float, default=None)
        p.add_argument("--lambda", dest="lam", type=float, default=None)
        p.add_argument("--nu", type=float, default=None)
        p.add_argument("--force-slope", dest="force_slope", type=float,
                       default=None)
        p.add_argument("--delta", type=float, default=None)
        p.add_argument("--nx", type=int, default=None)
        p.add_argument("--ny", type=int, default=None)
        p.add_argument("--tau", type=float, default=None)
        p.add_argument("--t-end", dest="t_end", type=float, default=None)
        p.add_argument("--snapshot-stride", dest="snapshot_stride", type=int,
                       default=None)
        p.add_argument("--outdir", default=None)
        p.add_argument("--config", default=None,
                       help="key=value file with the flags above")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    overrides = {key: getattr(args, key) for key in _FIELD_PARSERS
                 if hasattr(args, key)}
    try:
        cfg = build_config(args.experiment, args.config, overrides)
        result = run_experiment(cfg)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"{cfg.experiment} ({cfg.model}): {len(result.primary.records) - 1} "
          f"steps -> {result.primary.csv_path}")
    if result.cross_section is not None:
        print(f"  1D cross-section -> {result.cross_section.csv_path}")
    if result.error:
        print(f"error: {result.error}", file=sys.stderr)
    return result.status


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line front end: JSON run configs, the time loop, and file output.

Commands:
    pnp run --config FILE [--out DIR]
    pnp converge (--case NAME | --config FILE) --h H1,H2,... [--h-ref H]
                 [--t-final T] [--out DIR]
    pnp cases

Exit codes: 0 success, 2 config error, 3 compatibility error, 4 CFL or
positivity violation, 5 solver failure.

All data files are plain CSV.  trace.csv has one row per step with columns
t, dt, mass_<species>..., F, dissipation, min_c (dissipation is blank where
it is undefined); snapshot_<step>.csv holds one row per cell, row-major,
with columns x[, y], c_<species>..., psi.  Reruns of the same config are
byte-identical.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .diagnostics import detect_steady, free_energy
from .errors import (
    CflViolationError,
    CompatibilityError,
    ConfigError,
    PnpError,
    PositivityError,
    SolverFailure,
    UnsolvableSystemError,
)
from .grid import Grid1D, build_grid_1d, build_grid_2d
from .harness import (
    SpeciesSpec,
    TestCase,
    builtin_cases,
    case_by_name,
    discretize,
    format_convergence_csv,
    run_convergence_study,
)
from .poisson import (
    BoundaryData1D,
    BoundaryData2D,
    charge_source,
    check_compatibility,
    solve_poisson_1d,
    solve_poisson_2d,
)
from .scheme import CFL_POLICIES, SpeciesState, euler_step, max_stable_dt

DEFAULT_SAFETY = 0.9
DEFAULT_MAX_STEPS = 10_000_000
DEFAULT_H_REF = {1: 0.003125, 2: 0.0125}


@dataclass(frozen=True)
class SimConfig:
    grid: object
    species: tuple
    boundary: object
    t_final: Optional[float]
    steady_mode: bool
    k_user: Optional[float]          # None means "auto"
    policy: str
    safety: float
    out_dir: str
    snapshot_every: int
    compat_tol: float
    steady_residual_tol: float
    steady_g_tol: float
    max_steps: int

    @property
    def dimension(self) -> int:
        return 1 if isinstance(self.grid, Grid1D) else 2


@dataclass
class RunRecord:
    species_names: tuple
    times: list = field(default_factory=list)
    dts: list = field(default_factory=list)
    masses: list = field(default_factory=list)
    free_energies: list = field(default_factory=list)
    dissipations: list = field(default_factory=list)
    min_c: list = field(default_factory=list)
    final_states: list = field(default_factory=list)
    final_psi: Optional[np.ndarray] = None
    termination: str = "error"
    error: Optional[Exception] = None


def _need(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"missing field {key!r} in {where}")
    return mapping[key]


def parse_config(text: str) -> SimConfig:
    """Parse and validate a JSON run configuration.

    Besides structural checks this verifies that the declared initial data
    and boundary flux balance, so incompatible setups fail before any
    stepping starts.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc.msg} (line {exc.lineno})") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")

    gspec = _need(doc, "grid", "config")
    dim = int(_need(gspec, "dimension", "grid"))
    if dim == 1:
        grid = build_grid_1d(float(_need(gspec, "a", "grid")), float(_need(gspec, "b", "grid")),
                             int(_need(gspec, "n", "grid")))
    elif dim == 2:
        grid = build_grid_2d(
            float(_need(gspec, "ax", "grid")), float(_need(gspec, "bx", "grid")),
            float(_need(gspec, "ay", "grid")), float(_need(gspec, "by", "grid")),
            int(_need(gspec, "nx", "grid")), int(_need(gspec, "ny", "grid")))
    else:
        raise ConfigError(f"dimension must be 1 or 2, got {dim}")

    species = []
    for idx, sp in enumerate(doc.get("species", [])):
        species.append(SpeciesSpec(
            name=str(sp.get("name", f"c{idx + 1}")),
            charge=float(_need(sp, "charge", f"species[{idx}]")),
            initial=_need(sp, "initial", f"species[{idx}]"),
        ))
    names = [sp.name for sp in species]
    if len(set(names)) != len(names):
        raise ConfigError("species names must be unique")

    bspec = _need(doc, "boundary", "config")
    if dim == 1:
        boundary = BoundaryData1D(sigma_a=float(_need(bspec, "sigma_a", "boundary")),
                                  sigma_b=float(_need(bspec, "sigma_b", "boundary")))
    else:
        boundary = BoundaryData2D(
            left=float(_need(bspec, "left", "boundary")),
            right=float(_need(bspec, "right", "boundary")),
            bottom=float(_need(bspec, "bottom", "boundary")),
            top=float(_need(bspec, "top", "boundary")))

    tspec = _need(doc, "time", "config")
    t_final = tspec.get("t_final")
    steady = bool(tspec.get("steady_state", False))
    if (t_final is None) == (not steady):
        raise ConfigError("time spec must set exactly one of t_final / steady_state")
    k_raw = tspec.get("k", "auto")
    if k_raw == "auto":
        k_user = None
    else:
        k_user = float(k_raw)
        if k_user <= 0:
            raise ConfigError("time step k must be positive")

    cfl = doc.get("cfl", {})
    policy = cfl.get("policy", "auto")
    if policy not in CFL_POLICIES:
        raise ConfigError(f"cfl policy must be one of {CFL_POLICIES}, got {policy!r}")
    safety = float(cfl.get("safety", DEFAULT_SAFETY))
    if not 0 < safety <= 1:
        raise ConfigError("cfl safety factor must lie in (0, 1]")

    output = doc.get("output", {})
    tol = doc.get("tolerances", {})
    config = SimConfig(
        grid=grid,
        species=tuple(species),
        boundary=boundary,
        t_final=None if t_final is None else float(t_final),
        steady_mode=steady,
        k_user=k_user,
        policy=policy,
        safety=safety,
        out_dir=str(output.get("directory", "out")),
        snapshot_every=int(output.get("snapshot_every", 0)),
        compat_tol=float(tol.get("compatibility", 1e-10)),
        steady_residual_tol=float(tol.get("steady_residual", 1e-8)),
        steady_g_tol=float(tol.get("steady_g_flatness", 1e-6)),
        max_steps=int(tspec.get("max_steps", DEFAULT_MAX_STEPS)),
    )

    states = _initial_states(config)
    source = _combined_source(states, config)
    defect = check_compatibility(source, config.boundary, config.grid)
    if abs(defect) > config.compat_tol:
        raise CompatibilityError(
            f"initial data and boundary flux do not balance: defect {defect:.6e} "
            f"(tolerance {config.compat_tol:.1e})", defect=defect)
    return config


def _initial_states(config: SimConfig) -> list:
    return [SpeciesState(c=discretize(sp.initial, config.grid), q=sp.charge)
            for sp in config.species]


def _combined_source(states, config: SimConfig) -> np.ndarray:
    if states:
        return charge_source([s.c for s in states], [s.q for s in states])
    if config.dimension == 1:
        return np.zeros(config.grid.n)
    return np.zeros((config.grid.nx, config.grid.ny))


def _solve_potential(source, config: SimConfig) -> np.ndarray:
    if config.dimension == 1:
        return solve_poisson_1d(source, config.boundary, config.grid,
                                compat_tol=config.compat_tol)
    return solve_poisson_2d(source, config.boundary, config.grid,
                            compat_tol=config.compat_tol)


def _resolve_dt(config: SimConfig, states) -> float:
    """Apply the CFL policy to the requested step.

    "auto" clamps to safety * max stable step (and supplies that value
    when no k is given); "strict" refuses a step above the bound; "warn"
    lets it through with a warning.
    """
    bound = max_stable_dt(states, config.boundary, config.grid) if states else np.inf
    if config.k_user is None:
        if not np.isfinite(bound):
            raise ConfigError("k must be given explicitly for a run without species")
        return config.safety * bound
    k = config.k_user
    if k > bound:
        msg = (f"requested step k={k:.6e} exceeds the positivity-safe bound "
               f"{bound:.6e} for this setup")
        if config.policy == "strict":
            raise CflViolationError(msg, max_dt=bound)
        if config.policy == "warn":
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
        else:
            k = config.safety * bound
    return k


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def _write_snapshot(path: Path, config: SimConfig, states, psi) -> None:
    names = [sp.name for sp in config.species]
    lines = []
    if config.dimension == 1:
        lines.append(",".join(["x"] + [f"c_{n}" for n in names] + ["psi"]))
        xs = config.grid.cell_centers()
        for j in range(config.grid.n):
            row = [xs[j]] + [s.c[j] for s in states] + [psi[j]]
            lines.append(",".join(_fmt(v) for v in row))
    else:
        lines.append(",".join(["x", "y"] + [f"c_{n}" for n in names] + ["psi"]))
        xs, ys = config.grid.x_centers(), config.grid.y_centers()
        for i in range(config.grid.nx):
            for j in range(config.grid.ny):
                row = [xs[i], ys[j]] + [s.c[i, j] for s in states] + [psi[i, j]]
                lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _trace_lines(record: RunRecord) -> str:
    header = ["t", "dt"] + [f"mass_{n}" for n in record.species_names] + ["F", "dissipation", "min_c"]
    lines = [",".join(header)]
    for i in range(len(record.times)):
        row = [record.times[i], record.dts[i], *record.masses[i],
               record.free_energies[i], record.dissipations[i], record.min_c[i]]
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def run(config: SimConfig, out_dir: Optional[str] = None) -> RunRecord:
    """Execute a configured simulation and write its output files.

    Advances the coupled system until t_final is reached exactly (the
    final step is shortened) or, in steady mode, until the stopping rule
    fires.  Solver errors do not raise: the record comes back with
    termination "error" and the exception attached, and whatever trace
    rows exist are still written.
    """
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    names = tuple(sp.name for sp in config.species)
    record = RunRecord(species_names=names)
    states = _initial_states(config)

    def log_row(t, dt, states, psi, min_c):
        report = free_energy(states, psi, config.boundary, config.grid)
        record.times.append(t)
        record.dts.append(dt)
        record.masses.append(tuple(s.mass(config.grid) for s in states))
        record.free_energies.append(report.free_energy)
        record.dissipations.append(report.dissipation)
        record.min_c.append(min_c)

    step = 0
    try:
        psi = _solve_potential(_combined_source(states, config), config)
        initial_min = min((float(s.c.min()) for s in states), default=0.0)
        log_row(0.0, 0.0, states, psi, initial_min)
        if config.snapshot_every > 0:
            _write_snapshot(out / "snapshot_0.csv", config, states, psi)

        if not states:
            record.termination = "t_final_reached"
        else:
            k = _resolve_dt(config, states)
            t = 0.0
            # one Poisson solve per step: advance with the potential of the
            # current state, then re-solve so every logged row pairs a state
            # with its own potential
            while True:
                if config.steady_mode:
                    dt = k
                else:
                    remaining = config.t_final - t
                    if remaining <= 0:
                        record.termination = "t_final_reached"
                        break
                    dt = remaining if remaining <= k * (1.0 + 1e-12) else k
                if step >= config.max_steps:
                    raise SolverFailure(f"no termination within max_steps={config.max_steps}")
                prev = states
                states, rep = euler_step(states, psi, config.boundary, config.grid, dt,
                                         policy=config.policy, t=t)
                step += 1
                t = config.t_final if (not config.steady_mode and dt < k) else t + dt
                psi = _solve_potential(_combined_source(states, config), config)
                log_row(t, dt, states, psi, rep.min_c)
                if config.snapshot_every > 0 and step % config.snapshot_every == 0:
                    _write_snapshot(out / f"snapshot_{step}.csv", config, states, psi)
                if config.steady_mode:
                    steady = detect_steady(prev, states, psi, dt,
                                           tol_residual=config.steady_residual_tol,
                                           tol_g=config.steady_g_tol)
                    if steady.converged:
                        record.termination = "steady_state"
                        break
                elif t >= config.t_final:
                    record.termination = "t_final_reached"
                    break
        record.final_states = states
        record.final_psi = psi
        _write_snapshot(out / f"snapshot_{step}.csv", config, states, psi)
    except PnpError as exc:
        record.termination = "error"
        record.error = exc
    finally:
        (out / "trace.csv").write_text(_trace_lines(record))
    return record


def _case_from_config(config: SimConfig) -> TestCase:
    if config.dimension == 1:
        extent = (config.grid.a, config.grid.b)
    else:
        extent = (config.grid.ax, config.grid.bx, config.grid.ay, config.grid.by)
    return TestCase(name="config-case", dimension=config.dimension, extent=extent,
                    species=config.species, boundary=config.boundary,
                    t_final=config.t_final if config.t_final is not None else 0.5,
                    steady_energy=None, description="case built from a run config")


def converge_command(case: TestCase, hs: Sequence[float], out_dir: str,
                     h_ref: Optional[float] = None,
                     t_final: Optional[float] = None) -> list:
    """Run a convergence study, write convergence.csv, return the rows."""
    if h_ref is None:
        h_ref = DEFAULT_H_REF[case.dimension]
    rows = run_convergence_study(case, hs, h_ref, t_final)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "convergence.csv").write_text(format_convergence_csv(rows))
    return rows


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, CompatibilityError):
        return 3
    if isinstance(exc, (CflViolationError, PositivityError)):
        return 4
    if isinstance(exc, (UnsolvableSystemError, SolverFailure)):
        return 5
    return 5


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pnp",
                                     description="Charged-species drift-diffusion solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation from a JSON config")
    p_run.add_argument("--config", required=True, help="path to the JSON config")
    p_run.add_argument("--out", default=None, help="output directory (overrides config)")

    p_conv = sub.add_parser("converge", help="grid-refinement convergence study")
    group = p_conv.add_mutually_exclusive_group(required=True)
    group.add_argument("--case", help="name of a bundled case (see `pnp cases`)")
    group.add_argument("--config", help="JSON config to take the setup from")
    p_conv.add_argument("--h", required=True,
                        help="comma-separated grid spacings, e.g. 0.2,0.1,0.05")
    p_conv.add_argument("--h-ref", type=float, default=None,
                        help="reference spacing (default 0.003125 in 1D, 0.0125 in 2D)")
    p_conv.add_argument("--t-final", type=float, default=None,
                        help="comparison time (default: the case's own)")
    p_conv.add_argument("--out", default="out", help="output directory")

    sub.add_parser("cases", help="list bundled cases")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "cases":
            for case in builtin_cases():
                print(f"{case.name:22s} {case.dimension}D  {case.description}")
            return 0
        if args.command == "run":
            config = parse_config(Path(args.config).read_text())
            if config.dimension == 2 and config.k_user is None:
                print("note: the 2D step bound is a conservative heuristic, "
                      "not backed by the 1D positivity proof", file=sys.stderr)
            record = run(config, out_dir=args.out)
            if record.termination == "error":
                print(f"error: {record.error}", file=sys.stderr)
                return _exit_code(record.error)
            print(f"{record.termination} after {len(record.times) - 1} steps, "
                  f"t = {record.times[-1]:.6g}, F = {record.free_energies[-1]:.6g}")
            return 0
        if args.command == "converge":
            if args.case:
                case = case_by_name(args.case)
            else:
                case = _case_from_config(parse_config(Path(args.config).read_text()))
            try:
                hs = [float(tok) for tok in args.h.split(",") if tok.strip()]
            except ValueError as exc:
                raise ConfigError(f"bad --h list {args.h!r}") from exc
            rows = converge_command(case, hs, args.out, h_ref=args.h_ref,
                                    t_final=args.t_final)
            print("h,error_c,order_c,error_psi,order_psi")
            for row in rows:
                order_c = "" if row.order_c is None else f"{row.order_c:.4f}"
                order_psi = "" if row.order_psi is None else f"{row.order_psi:.4f}"
                print(f"{row.h:g},{row.error_c:.6g},{order_c},{row.error_psi:.6g},{order_psi}")
            return 0
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PnpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

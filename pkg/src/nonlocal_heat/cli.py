"""Config-driven command line: single solves, probes, studies, sweeps.

Configs are JSON.  Exit codes: 0 success, 2 fixed-point non-convergence
(artifacts are still written), 3 invalid config, 4 I/O failure.  All
randomness is seeded, and reports contain no timestamps or absolute paths,
so identical config + seed reproduces byte-identical JSON artifacts.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as nio
from .evolution import EvolutionConfig, SCHEMES
from .fixedpoint import (
    FixedPointReport,
    PicardConfig,
    picard_solve,
    uniqueness_probe,
    uniqueness_threshold,
)
from .laplacian import assemble
from .mesh import Field, Grid, norm_lp, restrict
from .potential import Potential, catalog
from .verify import verify_all

MODES = ("solve", "probe", "convergence_study", "sweep")
FORMATS = ("csv", "json", "bin")
THREADS_ENV = "NONLOCAL_HEAT_THREADS"

EXIT_OK = 0
EXIT_NO_CONVERGENCE = 2
EXIT_BAD_CONFIG = 3
EXIT_IO = 4


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


def _fail(field: str, message: str):
    raise ConfigError(f"{field}: {message}")


def _section(cfg: dict, name: str, required: bool = True) -> dict:
    value = cfg.get(name)
    if value is None:
        if required:
            _fail(name, "section is missing")
        return {}
    if not isinstance(value, dict):
        _fail(name, "must be an object")
    return value


def _number(section: dict, path: str, key: str, default=None, required=True):
    if key not in section:
        if required:
            _fail(f"{path}.{key}", "is required")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(f"{path}.{key}", f"must be a number, got {value!r}")
    return value


def _integer(section: dict, path: str, key: str, default=None, required=True):
    value = _number(section, path, key, default=default, required=required)
    if value is None:
        return None
    if int(value) != value:
        _fail(f"{path}.{key}", f"must be an integer, got {value!r}")
    return int(value)


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read '{path}': {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: '{path}' is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be an object")
    return cfg


def build_grid(cfg: dict) -> Grid:
    dom = _section(cfg, "domain")
    dim = _integer(dom, "domain", "dim")
    if dim not in (1, 2):
        _fail("domain.dim", f"must be 1 or 2, got {dim}")
    lengths = dom.get("lengths")
    n = dom.get("n")
    if not isinstance(lengths, list) or len(lengths) != dim:
        _fail("domain.lengths", f"must be a list of {dim} positive numbers")
    if not isinstance(n, list) or len(n) != dim:
        _fail("domain.n", f"must be a list of {dim} integers")
    if any(not isinstance(v, (int, float)) or v <= 0 for v in lengths):
        _fail("domain.lengths", f"must be positive, got {lengths}")
    if any(not isinstance(v, int) or v < 1 for v in n):
        _fail("domain.n", f"must be integers >= 1, got {n}")
    return Grid(tuple(float(v) for v in lengths), tuple(n))


def build_evolution_config(cfg: dict) -> EvolutionConfig:
    sec = _section(cfg, "time")
    T = _number(sec, "time", "T")
    if T <= 0:
        _fail("time.T", f"must be positive, got {T}")
    steps = _integer(sec, "time", "steps")
    if steps < 2:
        _fail("time.steps", f"must be >= 2, got {steps}")
    scheme = sec.get("scheme", "implicit_euler")
    if str(scheme).replace("-", "_") not in SCHEMES:
        _fail("time.scheme", f"must be one of {SCHEMES}, got {scheme!r}")
    store_every = _integer(sec, "time", "store_every", default=1, required=False)
    if store_every < 1:
        _fail("time.store_every", f"must be >= 1, got {store_every}")
    if steps % store_every != 0:
        _fail("time.store_every", f"must divide steps={steps}, got {store_every}")
    return EvolutionConfig(T=float(T), steps=steps, scheme=scheme, store_every=store_every)


def build_potential(cfg: dict) -> Potential:
    sec = _section(cfg, "potential")
    name = sec.get("name")
    if not isinstance(name, str):
        _fail("potential.name", "is required")
    params = sec.get("params", [])
    if not isinstance(params, list) or any(
        not isinstance(v, (int, float)) or isinstance(v, bool) for v in params
    ):
        _fail("potential.params", "must be a list of numbers")
    try:
        return catalog(name, params)
    except ValueError as exc:
        _fail("potential", str(exc))


def build_initial(cfg: dict, grid: Grid) -> Field:
    sec = _section(cfg, "initial")
    name = sec.get("name")
    params = sec.get("params", {})
    if not isinstance(params, dict):
        _fail("initial.params", "must be an object")
    if name == "sine_mode":
        k = params.get("k", 1)
        modes = k if isinstance(k, list) else [k] * grid.dim
        if len(modes) != grid.dim or any(not isinstance(m, int) or m < 1 for m in modes):
            _fail("initial.params.k", f"must be {grid.dim} positive integer(s), got {k}")
        amp = _number(params, "initial.params", "amplitude", default=1.0, required=False)

        def fn(*coords):
            out = float(amp) * np.ones_like(coords[0])
            for axis, x in enumerate(coords):
                out = out * np.sin(modes[axis] * math.pi * x / grid.lengths[axis])
            return out

        field = Field.from_function(grid, fn)
    elif name == "gaussian":
        center = params.get("center", [L / 2.0 for L in grid.lengths])
        centers = center if isinstance(center, list) else [center] * grid.dim
        if len(centers) != grid.dim:
            _fail("initial.params.center", f"must give {grid.dim} coordinate(s)")
        width = _number(params, "initial.params", "width")
        if width <= 0:
            _fail("initial.params.width", f"must be positive, got {width}")
        amp = _number(params, "initial.params", "amplitude", default=1.0, required=False)

        def fn(*coords):
            r2 = sum((x - float(c)) ** 2 for x, c in zip(coords, centers))
            return float(amp) * np.exp(-r2 / (2.0 * float(width) ** 2))

        field = Field.from_function(grid, fn)
    elif name == "constant":
        value = _number(params, "initial.params", "value")
        field = Field.constant(grid, value)
    elif name == "from_file":
        path = params.get("path")
        if not isinstance(path, str):
            _fail("initial.params.path", "is required for from_file")
        try:
            field = nio.read_field(path)
        except (OSError, ValueError) as exc:
            _fail("initial.params.path", f"cannot load field: {exc}")
        if field.grid != grid:
            _fail(
                "initial.params.path",
                f"field grid {field.grid.n} does not match domain.n {grid.n}",
            )
        scale = _number(params, "initial.params", "scale", default=1.0, required=False)
        field = float(scale) * field
    else:
        _fail("initial.name", f"unknown initial datum {name!r}")
    if sec.get("sign_check", False) and float(np.min(field.values)) < 0.0:
        _fail("initial.sign_check", "initial datum has negative entries")
    return field


def build_picard_config(cfg: dict) -> PicardConfig:
    sec = _section(cfg, "fixedpoint", required=False)
    tol = _number(sec, "fixedpoint", "tol", default=1e-10, required=False)
    max_iter = _integer(sec, "fixedpoint", "max_iter", default=200, required=False)
    damping = _number(sec, "fixedpoint", "damping", default=1.0, required=False)
    guess = sec.get("initial_guess", "zero")
    try:
        return PicardConfig(tol=tol, max_iter=max_iter, damping=damping, initial_guess=guess)
    except ValueError as exc:
        _fail("fixedpoint", str(exc))


def _output_settings(cfg: dict) -> tuple[Path, list[str]]:
    sec = _section(cfg, "output", required=False)
    out_dir = Path(sec.get("dir", "out"))
    formats = sec.get("formats", ["json"])
    if not isinstance(formats, list) or any(f not in FORMATS for f in formats):
        _fail("output.formats", f"must be a subset of {FORMATS}, got {formats}")
    return out_dir, formats


def _mode(cfg: dict) -> str:
    mode = cfg.get("mode", "solve")
    if mode not in MODES:
        _fail("mode", f"must be one of {MODES}, got {mode!r}")
    return mode


def _seed(cfg: dict) -> int:
    seed = cfg.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        _fail("seed", f"must be an integer, got {seed!r}")
    return seed


def _max_workers() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(int(raw), 1) if raw else 1
    except ValueError:
        return 1


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_field_outputs(field: Field, out_dir: Path, stem: str, formats: list[str]) -> dict:
    files = {}
    if "csv" in formats:
        nio.write_field_csv(field, out_dir / f"{stem}.csv")
        files[f"{stem}_csv"] = f"{stem}.csv"
    if "json" in formats:
        nio.write_field_json(field, out_dir / f"{stem}.json")
        files[f"{stem}_json"] = f"{stem}.json"
    return files


def _write_trajectory_outputs(report: FixedPointReport, out_dir: Path, formats: list[str]) -> dict:
    files = {}
    if "csv" in formats:
        nio.write_trajectory_csv(report.trajectory, out_dir / "trajectory.csv")
        files["trajectory_csv"] = "trajectory.csv"
    if "bin" in formats:
        nio.write_trajectory_bin(report.trajectory, out_dir / "trajectory.bin")
        files["trajectory_bin"] = "trajectory.bin"
    return files


def _run_header(cfg: dict, grid: Grid, ecfg: EvolutionConfig, seed: int) -> dict:
    return {
        "mode": _mode(cfg),
        "seed": seed,
        "grid": {"dim": grid.dim, "lengths": list(grid.lengths), "n": list(grid.n),
                 "h": list(grid.h)},
        "time": {"T": ecfg.T, "steps": ecfg.steps, "dt": ecfg.dt,
                 "scheme": ecfg.scheme, "store_every": ecfg.store_every},
        "potential": cfg["potential"],
    }


def _solve_once(cfg: dict):
    grid = build_grid(cfg)
    lap = assemble(grid)
    phi = build_potential(cfg)
    u0 = build_initial(cfg, grid)
    ecfg = build_evolution_config(cfg)
    pcfg = build_picard_config(cfg)
    report = picard_solve(lap, phi, u0, ecfg, pcfg)
    return grid, lap, phi, u0, ecfg, report


def _summary_line(report: FixedPointReport, verification) -> str:
    thr = report.threshold
    product = "n/a" if thr is None or not thr.applicable else f"{thr.product:.3e}"
    return (
        f"converged={report.converged} iterations={report.iterations} "
        f"final_residual={report.final_residual:.3e} threshold_product={product} "
        f"norms_ok={all(verification.solution_bounds.norm_ok.values())} "
        f"positivity_ok={verification.solution_bounds.positivity_ok} "
        f"energy_bound_ok={verification.energy.bound_ok} "
        f"elliptic_residual={verification.elliptic.relative_residual:.3e}"
    )


def run_solve(cfg: dict, out_dir: Path, formats: list[str], quiet: bool) -> int:
    grid, lap, phi, u0, ecfg, report = _solve_once(cfg)
    verification = verify_all(report, phi, lap)

    payload = _run_header(cfg, grid, ecfg, _seed(cfg))
    payload.update(report.scalar_diagnostics())
    payload["verification"] = verification.to_dict()
    files = {"config": "config.json", "report": "report.json"}
    files.update(_write_field_outputs(report.uT, out_dir, "ut", formats))
    files.update(_write_trajectory_outputs(report, out_dir, formats))
    payload["files"] = files
    _write_json(out_dir / "report.json", payload)
    if not quiet:
        print(_summary_line(report, verification))
    return EXIT_OK if report.converged else EXIT_NO_CONVERGENCE


def run_probe(cfg: dict, out_dir: Path, formats: list[str], quiet: bool) -> int:
    grid = build_grid(cfg)
    lap = assemble(grid)
    phi = build_potential(cfg)
    u0 = build_initial(cfg, grid)
    ecfg = build_evolution_config(cfg)
    pcfg = build_picard_config(cfg)
    sec = _section(cfg, "fixedpoint", required=False)
    n_starts = _integer(sec, "fixedpoint", "starts", default=5, required=False)
    if n_starts < 2:
        _fail("fixedpoint.starts", f"must be >= 2, got {n_starts}")
    seed = _seed(cfg)

    probe = uniqueness_probe(
        lap, phi, u0, ecfg, pcfg, n_starts=n_starts, seed=seed,
        max_workers=_max_workers(),
    )
    payload = _run_header(cfg, grid, ecfg, seed)
    payload["probe"] = probe.scalar_diagnostics()
    thr = uniqueness_threshold(phi, u0, grid, ecfg.T)
    payload["threshold"] = thr.to_dict()
    files = {"config": "config.json", "report": "report.json"}
    for kind, run in zip(probe.start_kinds, probe.runs):
        if run.converged:
            files.update(_write_field_outputs(run.uT, out_dir, "ut", formats))
            payload["probe"]["ut_from_start"] = kind
            break
    payload["files"] = files
    _write_json(out_dir / "report.json", payload)
    if not quiet:
        print(
            f"probe starts={n_starts} all_converged={probe.all_converged} "
            f"max_pairwise_relative={probe.max_pairwise_relative:.3e}"
        )
    return EXIT_OK


def _refined_config(cfg: dict, level: int, refine: str) -> dict:
    out = json.loads(json.dumps(cfg))  # deep copy
    if refine == "space_time":
        out["domain"]["n"] = [(m + 1) * 2**level - 1 for m in cfg["domain"]["n"]]
        out["time"]["steps"] = cfg["time"]["steps"] * 4**level
    else:  # time_only
        out["time"]["steps"] = cfg["time"]["steps"] * 2**level
    return out


def run_convergence_study(cfg: dict, out_dir: Path, quiet: bool) -> int:
    sec = _section(cfg, "study", required=False)
    levels = _integer(sec, "study", "levels", default=3, required=False)
    if levels < 2:
        _fail("study.levels", f"must be >= 2, got {levels}")
    refine = sec.get("refine", "space_time")
    if refine not in ("space_time", "time_only"):
        _fail("study.refine", f"must be 'space_time' or 'time_only', got {refine!r}")

    runs = []
    for level in range(levels):
        lcfg = _refined_config(cfg, level, refine)
        grid, lap, phi, u0, ecfg, report = _solve_once(lcfg)
        verification = verify_all(report, phi, lap)
        runs.append((grid, ecfg, report, verification))

    finest_grid, _, finest_report, _ = runs[-1]

    def on_grid(field: Field, grid: Grid) -> Field:
        return field if field.grid == grid else restrict(field, grid)

    scale = max(norm_lp(finest_report.uT, 2), 1e-300)
    errors_vs_finest = [
        norm_lp(on_grid(finest_report.uT, grid) - report.uT, 2) / scale
        for grid, _, report, _ in runs[:-1]
    ] + [0.0]
    diffs = [
        norm_lp(on_grid(runs[l + 1][2].uT, runs[l][0]) - runs[l][2].uT, 2) / scale
        for l in range(levels - 1)
    ]

    rows = []
    for level, (grid, ecfg, report, verification) in enumerate(runs):
        if level >= 2 and diffs[level - 1] > 0.0 and diffs[level - 2] > 0.0:
            order = f"{math.log2(diffs[level - 2] / diffs[level - 1]):.4f}"
        else:
            order = "n/a"
        rows.append({
            "level": level,
            "n": "x".join(str(m) for m in grid.n),
            "h": max(grid.h),
            "dt": ecfg.dt,
            "uT_error_vs_finest": errors_vs_finest[level],
            "elliptic_residual": verification.elliptic.relative_residual,
            "energy_mismatch": verification.energy.relative_mismatch,
            "observed_order": order,
        })

    header = "level,n,h,dt,uT_error_vs_finest,elliptic_residual,energy_mismatch,observed_order"
    lines = [header]
    for row in rows:
        lines.append(
            f"{row['level']},{row['n']},{row['h']:.10g},{row['dt']:.10g},"
            f"{row['uT_error_vs_finest']:.10e},{row['elliptic_residual']:.10e},"
            f"{row['energy_mismatch']:.10e},{row['observed_order']}"
        )
    (out_dir / "study.csv").write_text("\n".join(lines) + "\n")
    if not quiet:
        for line in lines:
            print(line)
    return EXIT_OK


def run_sweep(cfg: dict, out_dir: Path, quiet: bool) -> int:
    sec = _section(cfg, "sweep")
    axis = sec.get("axis")
    if axis not in ("T", "amplitude"):
        _fail("sweep.axis", f"must be 'T' or 'amplitude', got {axis!r}")
    values = sec.get("values")
    if not isinstance(values, list) or not values:
        _fail("sweep.values", "must be a nonempty list of numbers")
    if any(not isinstance(v, (int, float)) or isinstance(v, bool) for v in values):
        _fail("sweep.values", "must be numbers")

    def config_for(value: float) -> dict:
        out = json.loads(json.dumps(cfg))
        if axis == "T":
            out["time"]["T"] = value
        else:
            params = out["initial"].setdefault("params", {})
            if out["initial"].get("name") == "constant":
                params["value"] = value
            elif out["initial"].get("name") == "from_file":
                params["scale"] = value
            else:
                params["amplitude"] = value
        return out

    def run_row(value: float) -> dict:
        row = {"value": value, "converged": "", "iterations": "",
               "threshold_product": "", "final_residual": "", "error": ""}
        try:
            _, _, _, _, _, report = _solve_once(config_for(value))
            thr = report.threshold
            row.update(
                converged=report.converged,
                iterations=report.iterations,
                threshold_product=(
                    f"{thr.product:.10e}" if thr and thr.applicable else "n/a"
                ),
                final_residual=f"{report.final_residual:.10e}",
            )
        except Exception as exc:  # per-row failures are recorded, not fatal
            row["error"] = str(exc).replace(",", ";")
        return row

    ordered = sorted(float(v) for v in values)
    workers = _max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_row, ordered))
    else:
        rows = [run_row(v) for v in ordered]

    header = "value,converged,iterations,threshold_product,final_residual,error"
    lines = [header] + [
        f"{r['value']:.10g},{r['converged']},{r['iterations']},"
        f"{r['threshold_product']},{r['final_residual']},{r['error']}"
        for r in rows
    ]
    (out_dir / "sweep.csv").write_text("\n".join(lines) + "\n")
    if not quiet:
        for line in lines:
            print(line)
    return EXIT_OK


def run(
    config_path: str | Path,
    mode: str | None = None,
    out: str | Path | None = None,
    seed: int | None = None,
    quiet: bool = False,
) -> int:
    """Execute one config; returns the process exit code."""
    try:
        cfg = load_config(config_path)
        if mode is not None:
            cfg["mode"] = mode
        if out is not None:
            cfg.setdefault("output", {})["dir"] = str(out)
        if seed is not None:
            cfg["seed"] = seed
        _seed(cfg)
        active_mode = _mode(cfg)
        out_dir, formats = _output_settings(cfg)
        # validate the core sections up front so bad configs fail before work
        grid = build_grid(cfg)
        build_potential(cfg)
        build_initial(cfg, grid)
        build_evolution_config(cfg)
        build_picard_config(cfg)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "config.json", cfg)
        if active_mode == "solve":
            return run_solve(cfg, out_dir, formats, quiet)
        if active_mode == "probe":
            return run_probe(cfg, out_dir, formats, quiet)
        if active_mode == "convergence_study":
            return run_convergence_study(cfg, out_dir, quiet)
        return run_sweep(cfg, out_dir, quiet)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nonlocal-heat",
        description="Fixed-point solver for the time-integral-coupled heat equation.",
    )
    parser.add_argument("config", help="path to a JSON run configuration")
    parser.add_argument("--mode", choices=MODES, help="override the config mode")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--seed", type=int, help="override the random seed")
    parser.add_argument("--quiet", action="store_true", help="suppress the summary line")
    args = parser.parse_args(argv)
    return run(args.config, mode=args.mode, out=args.out, seed=args.seed, quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())

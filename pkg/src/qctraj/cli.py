"""Command-line harness: single runs and parameter scans.

Outputs per run: run.csv (diagnostics stream), trajectories.csv (positions
for phase portraits), snapshots/*.json (full states), manifest.json (resolved
config + code version). Exit codes: 0 success, 2 configuration/usage error,
3 geometry or divergence error, 1 anything else; failures print one JSON line
to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple

from . import __version__
from .config import apply_overrides, config_from_dict, load_raw
from .diagnostics import write_run_csv, write_snapshot, write_trajectories_csv
from .errors import ConfigError, DivergenceError, GeometryError, QCTrajError
from .integrate import integrate

SCAN_PARAMETERS = ("alpha", "N", "dt")
_SCAN_KEY = {"alpha": "mollifier.alpha", "N": "n_traj", "dt": "dt"}

INDEX_COLUMNS = (
    "param", "value", "status", "run_dir", "error",
    "t_final", "energy_first", "energy_last", "energy_drift_rel",
    "purity_first", "purity_last", "purity_change_max",
    "rho_min_eig_min", "norm_dev_max", "traj_purity_dev_max",
)


@dataclass(frozen=True)
class ScanSpec:
    """One swept parameter and its values."""

    parameter: str
    values: Tuple[float, ...]

    def __post_init__(self):
        if self.parameter not in SCAN_PARAMETERS:
            raise ConfigError(
                f"scan parameter must be one of {SCAN_PARAMETERS}, got {self.parameter!r}"
            )
        if not self.values:
            raise ConfigError("scan needs at least one value")
        if any(v <= 0 for v in self.values):
            raise ConfigError("scan values must be positive")
        if self.parameter == "N" and any(v != int(v) for v in self.values):
            raise ConfigError("N values must be integers")

    def override(self, value) -> str:
        if self.parameter == "N":
            return f"{_SCAN_KEY['N']}={int(value)}"
        return f"{_SCAN_KEY[self.parameter]}={value!r}"


def _emit_error(e: Exception) -> None:
    print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)


def _write_manifest(cfg, out_dir: Path, snapshot_names) -> None:
    manifest = {
        "version": __version__,
        "config": cfg.to_dict(),
        "outputs": {
            "run_csv": "run.csv",
            "trajectories_csv": "trajectories.csv",
            "snapshots": snapshot_names,
        },
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=1)
        f.write("\n")


def cmd_run(config_path, output_dir, overrides: Sequence[str] = ()) -> int:
    """Execute one run; raises QCTrajError subclasses on failure."""
    raw = apply_overrides(load_raw(config_path), overrides)
    cfg = config_from_dict(raw)
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    result = integrate(cfg)

    write_run_csv(result.records, out_dir / "run.csv")
    write_trajectories_csv(result.trajectory.times, result.trajectory.states,
                           out_dir / "trajectories.csv")
    snap_dir = out_dir / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    names = []
    if cfg.snapshot_every > 0:
        for i, (t, s) in enumerate(zip(result.trajectory.times, result.trajectory.states)):
            if i % cfg.snapshot_every == 0:
                name = f"snap_{i:05d}.json"
                write_snapshot(s, float(t), cfg.model, snap_dir / name)
                names.append(name)
    write_snapshot(result.final_state, cfg.t_final, cfg.model, snap_dir / "final.json")
    names.append("final.json")
    _write_manifest(cfg, out_dir, names)
    return 0


def cmd_scan(config_path, spec: ScanSpec, output_dir, overrides: Sequence[str] = ()) -> int:
    """Run once per scan value with per-value isolation; write index.csv."""
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    status = 0
    for value in spec.values:
        label = f"{int(value)}" if spec.parameter == "N" else f"{value:g}"
        run_dir = out_dir / f"{spec.parameter}={label}"
        row = {"param": spec.parameter, "value": label,
               "run_dir": run_dir.name, "error": ""}
        try:
            cmd_run(config_path, run_dir, list(overrides) + [spec.override(value)])
            # Re-read nothing: summarize from a fresh integration would double
            # the cost, so recover the summary from the run we just wrote.
            row.update(_summary_from_run_dir(run_dir))
            row["status"] = "ok"
        except QCTrajError as e:
            row["status"] = "error"
            row["error"] = f"{type(e).__name__}: {e}"
            if status == 0:
                status = _exit_code(e)
        rows.append(row)
    with open(out_dir / "index.csv", "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=INDEX_COLUMNS, restval="")
        writer.writeheader()
        writer.writerows(rows)
    return status


def _summary_from_run_dir(run_dir: Path) -> dict:
    """Endpoint summary computed from the run.csv just written."""
    with open(run_dir / "run.csv", "r", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        recs = list(reader)
    if not recs:
        return {}
    first, last = recs[0], recs[-1]
    energies = [float(r["energy"]) for r in recs]
    purities = [float(r["purity"]) for r in recs]
    e0 = energies[0]
    scale = max(abs(e0), 1e-30)
    norm_devs = []
    traj_pur_devs = []
    for r in recs:
        norm_devs.append(max(abs(float(r["norm_min"]) - 1.0), abs(float(r["norm_max"]) - 1.0)))
        traj_pur_devs.append(max(abs(float(r["traj_purity_min"]) - 1.0),
                                 abs(float(r["traj_purity_max"]) - 1.0)))
    return {
        "t_final": last["t"],
        "energy_first": first["energy"],
        "energy_last": last["energy"],
        "energy_drift_rel": repr(max(abs(e - e0) for e in energies) / scale),
        "purity_first": first["purity"],
        "purity_last": last["purity"],
        "purity_change_max": repr(max(abs(p - purities[0]) for p in purities)),
        "rho_min_eig_min": repr(min(float(r["rho_min_eig"]) for r in recs)),
        "norm_dev_max": repr(max(norm_devs)),
        "traj_purity_dev_max": repr(max(traj_pur_devs)),
    }


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="qctraj", description=__doc__)
    parser.add_argument("--version", action="version", version=f"qctraj {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="YAML config path")
        p.add_argument("--output-dir", required=True, help="directory for outputs")
        p.add_argument("--model", help="override the configured model")
        p.add_argument("--seed", type=int, help="override the sampling seed")
        p.add_argument("--dt", type=float, help="override the time step")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="dotted config override (repeatable)")
        p.add_argument("--deterministic", action="store_true",
                       help="pin BLAS threads for bit-for-bit reruns")

    run_p = sub.add_parser("run", help="execute one simulation")
    add_common(run_p)
    scan_p = sub.add_parser("scan", help="sweep alpha, N, or dt")
    add_common(scan_p)
    scan_p.add_argument("--param", required=True, choices=SCAN_PARAMETERS)
    scan_p.add_argument("--values", required=True,
                        help="comma-separated positive values, e.g. 0.25,0.5,1.0")
    return parser


def _collect_overrides(args) -> list:
    overrides = list(args.overrides)
    if args.model is not None:
        overrides.append(f"model={args.model}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.dt is not None:
        overrides.append(f"dt={args.dt!r}")
    if args.deterministic:
        overrides.append("deterministic=true")
    return overrides


def _exit_code(e: Exception) -> int:
    if isinstance(e, ConfigError):
        return 2
    if isinstance(e, (GeometryError, DivergenceError)):
        return 3
    return 1


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        overrides = _collect_overrides(args)
        if args.command == "run":
            return cmd_run(args.config, args.output_dir, overrides)
        values = tuple(float(v) for v in args.values.split(",") if v.strip())
        spec = ScanSpec(parameter=args.param, values=values)
        return cmd_scan(args.config, spec, args.output_dir, overrides)
    except QCTrajError as e:
        _emit_error(e)
        return _exit_code(e)
    except ValueError as e:
        _emit_error(e)
        return 2


if __name__ == "__main__":
    sys.exit(main())

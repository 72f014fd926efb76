"""Command-line front end.

Subcommands:
  scan       reflection curves over an angle grid, one CSV per (surface, T0)
  verify     run the validity gates and emit a machine-readable report
  fit-sigma  quality-of-fit between a theory CSV and an experimental CSV

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfg
from . import verify as ver
from .experiment import BeamSource, run_scan, sigma_from_arrays
from .potential import available_surfaces
from .solver import GridSpec

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _scan_csv_name(surface: str, t0: float) -> str:
    return f"scan_{surface}_T{t0:g}K.csv"


def write_scan_csv(path: Path, scan, config: cfg.RunConfig) -> None:
    orders = scan.order_columns()
    header = ["theta_grazing_mrad", "k_perp_nm_inv", "p_qr"]
    header += [f"I_{o:+d}" if o != 0 else "I_0" for o in orders]
    lines = ["# qreflect scan"]
    lines += ["# " + ln for ln in cfg.emit(config).strip().splitlines()]
    lines.append(",".join(header))
    for pt in scan.points:
        row = [_fmt(pt.theta_grazing * 1e3), _fmt(pt.k_perp_nm), _fmt(pt.p_qr)]
        row += [_fmt(pt.intensities.get(o, 0.0)) for o in orders]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_scan(args) -> int:
    try:
        config = cfg.load(args.config) if args.config else cfg.RunConfig()
        config = _apply_overrides(config, args)
        surface = config.surface_obj()
    except (KeyError, ValueError) as exc:
        print(f"error: {_strip(exc)}", file=sys.stderr)
        return USAGE_ERROR

    out_dir = Path(config.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        angles = config.angle_grid()
        for t0 in config.t0:
            scan = run_scan(
                surface,
                BeamSource(t0),
                angles,
                config.absorber(),
                grid=config.grid(),
                n_max=None if config.n_max < 0 else config.n_max,
            )
            path = out_dir / _scan_csv_name(config.surface, t0)
            write_scan_csv(path, scan, config)
            print(f"wrote {path}")
    except Exception as exc:
        print(f"error: {_strip(exc)}", file=sys.stderr)
        return RUNTIME_ERROR
    return 0


def cmd_verify(args) -> int:
    try:
        config = cfg.load(args.config) if args.config else cfg.RunConfig()
        config = _apply_overrides(config, args)
    except (KeyError, ValueError) as exc:
        print(f"error: {_strip(exc)}", file=sys.stderr)
        return USAGE_ERROR

    grid = config.grid()
    absorber = config.absorber()
    n = max(2, args.points)
    try:
        gates = [
            ver.unitarity_gate(ver.sweep_points(n, n), grid=grid),
            ver.independence_gate(
                ver.sweep_points(n, 0)[: max(2, n // 2)], absorber, grid=grid
            ),
            ver.grid_convergence_gate(
                ver.sweep_points(2, 2), absorber, grid=grid
            ),
            ver.channel_convergence_gate(
                ver.sweep_points(0, 2), absorber, grid=grid,
                n_max_base=10, n_max_test=14 if args.quick else 20,
            ),
        ]
    except Exception as exc:
        print(f"error: {_strip(exc)}", file=sys.stderr)
        return RUNTIME_ERROR

    report = {"gates": [g.as_dict() for g in gates], "all_passed": all(g.passed for g in gates)}
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0 if report["all_passed"] else RUNTIME_ERROR


def _read_csv_columns(path: Path) -> dict[str, np.ndarray]:
    rows = []
    header = None
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if header is None:
            header = [c.strip() for c in line.split(",")]
            continue
        rows.append([float(c) for c in line.split(",")])
    if header is None or not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.asarray(rows)
    return {name: data[:, i] for i, name in enumerate(header)}


def cmd_fit_sigma(args) -> int:
    try:
        theo = _read_csv_columns(Path(args.theory))
        exp = _read_csv_columns(Path(args.experiment))
        k_theo = theo["k_perp_nm_inv"]
        p_theo = theo["p_qr"] if "p_qr" in theo else theo["probability"]
        k_exp = exp["k_perp_nm_inv"]
        p_exp = exp["probability"] if "probability" in exp else exp["p_qr"]
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {_strip(exc)}", file=sys.stderr)
        return USAGE_ERROR
    try:
        sigma, table = sigma_from_arrays(k_exp, p_exp, k_theo, p_theo)
    except ValueError as exc:
        print(f"error: {_strip(exc)}", file=sys.stderr)
        return RUNTIME_ERROR
    print("k_perp_nm_inv,P_exp,P_theo,rel_dev")
    for k, pe, pt in table:
        print(f"{_fmt(k)},{_fmt(pe)},{_fmt(pt)},{_fmt((pe - pt) / pe)}")
    print(f"sigma = {_fmt(sigma)}")
    return 0


def _strip(exc: Exception) -> str:
    return str(exc).strip('"')


def _apply_overrides(config: cfg.RunConfig, args) -> cfg.RunConfig:
    updates = {}
    if getattr(args, "surface", None):
        if args.surface != "custom" and args.surface not in available_surfaces():
            raise KeyError(
                f"unknown surface {args.surface!r}; available presets: "
                f"{available_surfaces()}"
            )
        updates["surface"] = args.surface
    if getattr(args, "T0", None):
        updates["t0"] = tuple(args.T0)
    if getattr(args, "angles", None):
        cfg.parse_angles(args.angles)  # validate early
        updates["angles"] = args.angles
    if getattr(args, "absorber", None):
        parts = args.absorber.split(",")
        if len(parts) != 3:
            raise ValueError("--absorber expects A,alpha,zi")
        updates["absorber_amplitude"] = float(parts[0])
        updates["absorber_alpha"] = float(parts[1])
        updates["absorber_zi"] = float(parts[2])
    if getattr(args, "nmax", None) is not None:
        updates["n_max"] = args.nmax
    if getattr(args, "out", None):
        updates["out"] = args.out
    return replace(config, **updates) if updates else config


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qreflect",
        description="Quantum threshold reflection of He beams from surfaces",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="TOML config file")
        sp.add_argument("--surface", help="preset name or 'custom'")
        sp.add_argument("--T0", type=float, action="append",
                        help="stagnation temperature in K (repeatable)")
        sp.add_argument("--angles", help="grazing angles, start:stop:count[log|lin] in mrad")
        sp.add_argument("--absorber", help="A,alpha,zi (meV, -, Angstrom)")
        sp.add_argument("--nmax", type=int, help="channel truncation order")
        sp.add_argument("--out", help="output directory (scan) or file (verify)")

    ps = sub.add_parser("scan", help="compute reflection curves, write CSV")
    add_common(ps)
    ps.set_defaults(func=cmd_scan)

    pv = sub.add_parser("verify", help="run validity gates")
    add_common(pv)
    pv.add_argument("--points", type=int, default=6,
                    help="sweep points per gate (default 6)")
    pv.add_argument("--quick", action="store_true",
                    help="smaller channel-convergence test")
    pv.set_defaults(func=cmd_verify)

    pf = sub.add_parser("fit-sigma", help="fit quality against experimental CSV")
    pf.add_argument("theory", help="theory CSV (scan output)")
    pf.add_argument("experiment", help="experimental CSV: k_perp_nm_inv,probability")
    pf.set_defaults(func=cmd_fit_sigma)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

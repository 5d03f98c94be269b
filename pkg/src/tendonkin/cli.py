"""Command-line entry point: ``tendonkin {solve,baseline,sweep,gait,calibrate}``.

Exit codes:

* 0 success
* 1 bad arguments or unparseable input
* 2 domain error (invalid values, missing files in a dataset, failed tube check)
* 3 a solve did not converge
* 4 robot file dimension mismatch
* 5 robot file invariant violation
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import kernels
from .calibration import SearchRanges, calibrate, sample_errors
from .errors import DomainError, NumericalError
from .gait import HelixSpec, rolling_gait, tube_clearance
from .geometry import forward_kinematics, frame_origins, tendon_waypoints_world
from .io import (FORMAT_VERSION, RobotFileError, load_robot_description, read_command,
                 read_ground_truth_csv, write_gait_csv, write_shape_csv)
from .statics import ActuationCommand, SolverConfig, solve_baseline_frictionless, solve_statics

log = logging.getLogger("tendonkin")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2
EXIT_NOT_CONVERGED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _pull(text: str) -> tuple[int, float]:
    idx, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected TENDON=METERS, got {text!r}")
    try:
        return int(idx), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected TENDON=METERS, got {text!r}") from None


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _emit(**kv) -> None:
    for k, v in kv.items():
        if isinstance(v, (list, tuple, np.ndarray)):
            v = ",".join(format(float(x), ".17g") for x in np.ravel(v))
        elif isinstance(v, float):
            v = format(v, ".17g")
        elif isinstance(v, bool):
            v = str(v).lower()
        print(f"{k}={v}")


def _config(args, desc) -> SolverConfig:
    mu = args.mu if args.mu is not None else (desc.mu or 0.0)
    stretch = args.stretch if args.stretch is not None else (desc.stretch_compliance or 0.0)
    return SolverConfig(mu=mu, stretch_compliance=stretch, release_model=args.release_model)


def _add_solver_flags(p, with_q0=True):
    p.add_argument("robot", type=Path, help="robot description JSON")
    p.add_argument("--mu", type=float, help="friction coefficient (default: robot file or 0)")
    p.add_argument("--stretch", type=float, help="stretch compliance in m per unit tension")
    p.add_argument("--release-model", choices=("slack", "taut"), default="slack")
    if with_q0:
        p.add_argument("--q0", type=_floats, help="initial joint state, 2n comma-separated radians")


def _write_shape(path, geom, q, with_waypoints):
    wps = None
    if with_waypoints:
        wps = np.stack([tendon_waypoints_world(geom, q, t) for t in range(geom.n_tendons)])
    write_shape_csv(path, frame_origins(geom, q), wps)


def cmd_solve(args, baseline=False) -> int:
    desc = load_robot_description(args.robot)
    geom = desc.geometry
    cmd = ActuationCommand.from_pulls(geom.n_tendons, dict(args.pull or []))
    cfg = _config(args, desc)
    if args.q0 is not None:
        cfg = replace(cfg, q0=args.q0)
    solver = solve_baseline_frictionless if (baseline or args.baseline) else solve_statics
    res = solver(geom, cmd, cfg)
    if args.out:
        _write_shape(args.out, geom, res.q_star, args.waypoints)
    tip = forward_kinematics(geom, res.q_star)[-1].translation
    _emit(converged=res.converged, iterations=res.iterations, cost=res.cost,
          kkt_residual=res.kkt_residual, max_constraint_violation=res.max_constraint_violation,
          displacement_residuals_m=res.displacement_residuals,
          relative_tensions=res.relative_tensions, q=res.q_star, tip_m=tip,
          mu=0.0 if solver is solve_baseline_frictionless else cfg.mu, backend=kernels.BACKEND)
    if not res.converged:
        log.error("solve did not converge: %s", res.message)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_sweep(args) -> int:
    desc = load_robot_description(args.robot)
    geom = desc.geometry
    if not 0 <= args.tendon < geom.n_tendons:
        raise DomainError(f"tendon index {args.tendon} out of range [0, {geom.n_tendons})")
    if args.steps < 1:
        raise DomainError("--steps must be at least 1")
    cfg = _config(args, desc)
    values = np.linspace(args.start, args.stop, args.steps)
    rows = []
    q_prev = None
    failed = 0
    if args.shapes_dir:
        args.shapes_dir.mkdir(parents=True, exist_ok=True)
    for k, d in enumerate(values):
        cmd = ActuationCommand.from_pulls(geom.n_tendons, {args.tendon: float(d)})
        res = solve_statics(geom, cmd, replace(cfg, q0=q_prev))
        if res.converged and np.any(res.q_star):
            q_prev = res.q_star  # warm start the next point
        failed += not res.converged
        tip = frame_origins(geom, res.q_star)[-1]
        rows.append([k, d, res.converged, res.cost, *tip])
        if args.shapes_dir:
            _write_shape(args.shapes_dir / f"step_{k:04d}.csv", geom, res.q_star, False)
    with open(args.out, "w") as fh:
        fh.write(f"# format_version={FORMAT_VERSION}\n")
        fh.write("step,displacement_m,converged,cost,tip_x_m,tip_y_m,tip_z_m\n")
        for k, *vals in rows:
            fh.write(",".join([str(k)] + [format(float(v), ".17g") for v in vals]) + "\n")
    _emit(points=len(rows), failed=failed)
    return EXIT_NOT_CONVERGED if failed else EXIT_OK


def cmd_gait(args) -> int:
    desc = load_robot_description(args.robot)
    geom = desc.geometry
    spec = HelixSpec(args.radius, np.radians(args.pitch_deg), args.handedness, np.radians(args.phase_deg))
    seq = rolling_gait(geom, spec, args.steps, args.frequency, workers=args.workers)
    write_gait_csv(args.out, seq.displacements)
    if args.shapes_dir:
        args.shapes_dir.mkdir(parents=True, exist_ok=True)
        for k, q in enumerate(seq.joint_states):
            _write_shape(args.shapes_dir / f"step_{k:04d}.csv", geom, q, False)
    _emit(steps=args.steps, max_fit_rms_m=max(seq.fit_rms), frequency_hz=seq.frequency_hint)
    if args.tube_id is not None:
        tc = tube_clearance(geom, seq.helices, seq.joint_states, args.tube_id, args.body_od)
        _emit(tube_clearance="pass" if tc.ok else "fail", max_axis_distance_m=tc.max_axis_distance,
              envelope_m=tc.envelope, body_margin_m=tc.body_margin)
        if not tc.ok:
            return EXIT_DOMAIN
    return EXIT_OK


def _load_dataset(directory: Path, n_tendons: int):
    if not directory.is_dir():
        raise DomainError(f"{directory}: not a directory")
    commands = sorted(directory.glob("*.command.json"))
    if not commands:
        raise DomainError(f"{directory}: no *.command.json files")
    data = []
    for c in commands:
        stem = c.name[: -len(".command.json")]
        truth = directory / f"{stem}.truth.csv"
        if not truth.exists():
            raise DomainError(f"missing ground truth file {truth}")
        cmd = read_command(c)
        if cmd.displacements.size != n_tendons:
            raise DomainError(f"{c}: expected {n_tendons} displacements")
        data.append((stem, cmd, read_ground_truth_csv(truth)))
    return data


def cmd_calibrate(args) -> int:
    desc = load_robot_description(args.robot)
    geom = desc.geometry
    named = _load_dataset(args.dataset, geom.n_tendons)
    dataset = [(c, t) for _, c, t in named]
    ranges = SearchRanges(tuple(args.mu_range), tuple(args.stretch_range), args.mu_step, args.stretch_step)
    base = SolverConfig(release_model=args.release_model)
    before = sample_errors(geom, dataset, desc.mu or 0.0, desc.stretch_compliance or 0.0, base)
    res = calibrate(geom, dataset, ranges, base, workers=args.workers)
    for (name, _, _), e0, e1 in zip(named, before, res.sample_errors):
        _emit(**{f"sample.{name}.error_before_m": float(e0), f"sample.{name}.error_after_m": float(e1)})
    _emit(mu=res.mu, stretch_compliance_m=res.stretch_compliance,
          mean_error_before_m=float(np.mean(before)), std_error_before_m=float(np.std(before)),
          mean_error_m=res.mean_error, std_error_m=float(np.std(res.sample_errors)),
          grid_points=res.evaluations)
    if args.out:
        doc = {"format_version": FORMAT_VERSION, "mu": res.mu,
               "stretch_compliance_m": res.stretch_compliance, "mean_tip_error_m": res.mean_error,
               "samples": {name: float(e) for (name, _, _), e in zip(named, res.sample_errors)}}
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tendonkin", description="Shape estimation and gait planning for "
                "universal-jointed tendon-driven continuum robots.")
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name in ("solve", "baseline"):
        s = sub.add_parser(name, help="estimate the shape for tendon displacements"
                           + (" with friction ignored" if name == "baseline" else ""))
        _add_solver_flags(s)
        s.add_argument("--pull", type=_pull, action="append", metavar="TENDON=METERS",
                       help="commanded displacement (negative releases); repeatable")
        s.add_argument("--baseline", action="store_true", help="force mu = 0")
        s.add_argument("--out", type=Path, help="shape CSV to write")
        s.add_argument("--waypoints", action="store_true",
                       help="also write tendon way points next to the shape CSV")

    s = sub.add_parser("sweep", help="solve along a displacement ramp of one tendon")
    _add_solver_flags(s, with_q0=False)
    s.add_argument("--tendon", type=int, required=True)
    s.add_argument("--start", type=float, default=0.0)
    s.add_argument("--stop", type=float, required=True)
    s.add_argument("--steps", type=int, default=10)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--shapes-dir", type=Path)

    s = sub.add_parser("gait", help="tendon displacement sequence for a helical rolling gait")
    s.add_argument("robot", type=Path)
    s.add_argument("--radius", type=float, required=True, help="helix radius in m")
    s.add_argument("--pitch-deg", type=float, required=True,
                   help="angle between the helix tangent and its axis, degrees")
    s.add_argument("--handedness", choices=("right", "left"), default="right")
    s.add_argument("--phase-deg", type=float, default=0.0)
    s.add_argument("--steps", type=int, default=12)
    s.add_argument("--frequency", type=float, default=0.33, help="metadata only, Hz")
    s.add_argument("--out", type=Path, default=Path("gait.csv"))
    s.add_argument("--shapes-dir", type=Path)
    s.add_argument("--tube-id", type=float, help="tube inner diameter in m; enables the clearance check")
    s.add_argument("--body-od", type=float, default=0.015, help="robot body diameter in m")
    s.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("calibrate", help="grid-fit mu and stretch compliance to ground truth shapes")
    s.add_argument("robot", type=Path)
    s.add_argument("dataset", type=Path, help="directory of NAME.command.json + NAME.truth.csv pairs")
    s.add_argument("--mu-range", type=float, nargs=2, default=(0.0, 0.3))
    s.add_argument("--stretch-range", type=float, nargs=2, default=(0.0, 1e-3))
    s.add_argument("--mu-step", type=float, default=0.01)
    s.add_argument("--stretch-step", type=float, default=5e-5)
    s.add_argument("--release-model", choices=("slack", "taut"), default="slack")
    s.add_argument("--out", type=Path, default=Path("calibration.json"))
    s.add_argument("--workers", type=int, default=1)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {
        "solve": cmd_solve,
        "baseline": lambda a: cmd_solve(a, baseline=True),
        "sweep": cmd_sweep,
        "gait": cmd_gait,
        "calibrate": cmd_calibrate,
    }
    try:
        return handlers[args.command](args)
    except RobotFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (DomainError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())

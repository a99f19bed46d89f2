"""
Command-line front end for the weak measurement simulator

Subcommands: weakvalue, sweep, montecarlo, flowfield, verify.
Results go to --out (or stdout); logs go to stderr.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence
import argparse
import json
import logging
import math
import sys

import pandas as pd

from .config import RunConfig, SimulationConfig, build_observable, load_run_config
from .core import PureState
from .engine import (
    ball_grid,
    bloch_flow_field,
    equatorial_grid,
    monte_carlo,
    predicted_snr,
    setup_weak_value,
    success_probability,
)
from .errors import ConfigError, PropertyFailure, WeakProbeError
from .experiment import sweep
from .verify import FAULTS, run_all

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["delta_rad", "im_wv_extracted", "im_wv_analytic", "fit_stderr"]
FLOW_COLUMNS = ["x", "y", "z", "vx_re", "vy_re", "vz_re", "vx_im", "vy_im", "vz_im"]


def setup_logging(level: str = "INFO", log_file: Optional[str] = None) -> None:
    """Configure root logging on stderr, plus ``log_file`` when given."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


# Output

def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    logger.info("wrote %s", out)


def _to_csv(rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> str:
    df = pd.DataFrame(list(rows), columns=list(columns))
    return df.to_csv(index=False, float_format="%.17g", lineterminator="\n")


def _to_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _table(rows: Sequence[Dict[str, Any]], columns: Sequence[str], fmt: Optional[str]) -> str:
    if fmt == "json":
        return _to_json([{c: row[c] for c in columns} for row in rows])
    return _to_csv(rows, columns)


# Subcommands

def cmd_weakvalue(cfg: RunConfig) -> int:
    """Print the weak value of A and the post-selection probability."""
    setup = cfg.build_setup()
    w = setup_weak_value(setup)
    p = success_probability(setup)
    logger.debug("weak value %s, P(f|i) %s", w, p)
    if cfg.format == "json":
        _emit(_to_json({"re": w.real, "im": w.imag, "p": p}), cfg.output_path)
    else:
        _emit(f"re={w.real:.12g} im={w.imag:.12g} p={p:.12g}\n", cfg.output_path)
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    """Extract Im<P0>_w over the configured post-selection phases."""
    deltas = cfg.sweep.delta_values()
    records = sweep(deltas, cfg.build_mz_config(), workers=cfg.sweep.workers)
    _emit(_table([r.to_row() for r in records], SWEEP_COLUMNS, cfg.format), cfg.output_path)
    return 0


def cmd_montecarlo(cfg: RunConfig) -> int:
    """Simulate shots and compare the empirical SNR with the prediction."""
    setup = cfg.build_setup()
    mc = cfg.montecarlo
    M = setup.K if mc.observable is None else build_observable(mc.observable)
    result = monte_carlo(
        setup, M, mc.shots, cfg.seed,
        workers=mc.workers,
        chunk_size=mc.chunk_size,
        pre_noise=cfg.pre_noise(),
        post_noise=cfg.post_noise(),
    )
    report = result.to_dict()
    report["predicted_snr"] = predicted_snr(setup, mc.shots)
    if cfg.format == "csv":
        _emit(_to_csv([report], sorted(report)), cfg.output_path)
    else:
        _emit(_to_json(report), cfg.output_path)
    return 0


def cmd_flowfield(cfg: RunConfig) -> int:
    """Export the first-order Bloch flow of qubit probe states."""
    pre, post, A, K = cfg.measured_selections()
    if not (isinstance(pre, PureState) and isinstance(post, PureState)):
        raise ConfigError("flowfield needs pure pre- and post-selection (visibility 1)")
    ff = cfg.flowfield
    grid = equatorial_grid(ff.radii, ff.angles) if ff.grid == "equatorial" else ball_grid(ff.step)
    flow = bloch_flow_field(A, K, pre, post, grid, theta=ff.theta)
    rows = [dict(zip(FLOW_COLUMNS, (*f.point, *f.velocity_re, *f.velocity_im))) for f in flow]
    _emit(_table(rows, FLOW_COLUMNS, cfg.format), cfg.output_path)
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    """Run the property battery; exit 4 when any property fails."""
    results = run_all(cfg.seed, cfg.verify)
    rows = [r.to_dict() for r in results]
    if cfg.format == "csv":
        _emit(_to_csv(rows, ["name", "passed", "metric", "detail"]), cfg.output_path)
    else:
        _emit(_to_json({"seed": cfg.seed, "passed": all(r.passed for r in results), "properties": rows}),
              cfg.output_path)
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise PropertyFailure(failed)
    return 0


COMMANDS = {
    "weakvalue": cmd_weakvalue,
    "sweep": cmd_sweep,
    "montecarlo": cmd_montecarlo,
    "flowfield": cmd_flowfield,
    "verify": cmd_verify,
}


# Argument handling

def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or INI run configuration")
    common.add_argument("--out", help="Output file (default: stdout)")
    common.add_argument("--seed", type=int, help="Random seed")
    common.add_argument("--format", choices=["csv", "json"], help="Output format")
    common.add_argument("--degrees", action="store_true",
                        help="Read --delta, --deltas and --hwp-angle in degrees")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                        help="Logging level (default from config, else INFO)")

    setup_flags = argparse.ArgumentParser(add_help=False)
    setup_flags.add_argument("--delta", type=float, help="Post-selection phase")
    setup_flags.add_argument("--visibility", type=float, help="Fringe visibility V")
    setup_flags.add_argument("--coupling", type=float, help="Coupling strength theta")
    setup_flags.add_argument("--hwp-angle", type=float, help="Half-wave-plate angle (coupling = -2 angle)")

    parser = argparse.ArgumentParser(
        prog="weakprobe",
        description="Weak measurements with mixed probe states",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("weakvalue", parents=[common, setup_flags], help="Weak value and P(f|i)")

    p_sweep = sub.add_parser("sweep", parents=[common, setup_flags], help="Interferometer phase sweep")
    p_sweep.add_argument("--deltas", type=_float_list, help="Comma-separated post-selection phases")
    p_sweep.add_argument("--fit-order", type=int, choices=[1, 3], help="Polynomial order of the slope fit")
    p_sweep.add_argument("--workers", type=int, help="Worker threads")

    p_mc = sub.add_parser("montecarlo", parents=[common, setup_flags], help="Shot-level simulation")
    p_mc.add_argument("--shots", type=int, help="Number of shots N")
    p_mc.add_argument("--workers", type=int, help="Worker threads")

    sub.add_parser("flowfield", parents=[common, setup_flags], help="Bloch-ball flow vectors")

    p_verify = sub.add_parser("verify", parents=[common], help="Run the property battery")
    p_verify.add_argument("--inject-fault", choices=list(FAULTS), help="Deliberately break a property")

    return parser


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Fold command-line flags into the configuration and re-validate it."""
    data = cfg.to_dict()
    angle = math.radians if args.degrees else float

    if args.seed is not None:
        data["seed"] = args.seed
    if args.format is not None:
        data["format"] = args.format
    if args.out is not None:
        data["output_path"] = args.out

    setup = data["setup"]
    if getattr(args, "delta", None) is not None:
        setup["delta"] = angle(args.delta)
    if getattr(args, "visibility", None) is not None:
        setup["visibility"] = args.visibility
    if getattr(args, "coupling", None) is not None:
        setup["coupling"] = args.coupling
        setup["hwp_angle"] = None
    if getattr(args, "hwp_angle", None) is not None:
        setup["hwp_angle"] = angle(args.hwp_angle)

    if getattr(args, "deltas", None) is not None:
        data["sweep"]["deltas"] = [angle(d) for d in args.deltas]
    if getattr(args, "fit_order", None) is not None:
        data["sweep"]["fit_order"] = args.fit_order
    if getattr(args, "shots", None) is not None:
        data["montecarlo"]["shots"] = args.shots
    if getattr(args, "workers", None) is not None:
        data["sweep"]["workers"] = args.workers
        data["montecarlo"]["workers"] = args.workers
    if getattr(args, "inject_fault", None) is not None:
        data["verify"]["inject_fault"] = args.inject_fault

    return RunConfig.from_dict(data)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        SimulationConfig.reset()
        cfg = apply_overrides(load_run_config(args.config), args)
        setup_logging(args.log_level or cfg.logging.level, cfg.logging.file)
        logger.info("running %s (seed %d)", args.command, cfg.seed)
        return COMMANDS[args.command](cfg)
    except WeakProbeError as e:
        print(f"error: {e.code}: {e.reason}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        reason = " ".join(str(e).split())
        print(f"error: invalid-input: {reason}", file=sys.stderr)
        return 1
    except OSError as e:
        reason = " ".join(str(e).split())
        print(f"error: io: {reason}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

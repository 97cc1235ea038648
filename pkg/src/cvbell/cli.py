"""Command-line interface.

Subcommands:
    simulate  closed-form Bell value and coincidence tables for a config
    sweep     closed-form B over a grid of one config parameter (CSV)
    fringe    coincidence fringes vs analyzer angle, with visibility
    sample    synthesize homodyne records into a directory
    analyze   bootstrap Bell estimate from a records directory
    fit       fit source/channel parameters to coincidence tables

Exit codes: 0 success; 2 usage, config, or data-format error; 3 the state
carries no photon correlations (structured JSON error on stdout); 4 the
fit did not converge (best-so-far result is still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, kernels
from .analysis import bootstrap
from .circuit import analyze as analyze_state
from .circuit import build_bell_state, fringe, r_table
from .config import RunConfig, config_from_dict
from .correlations import bell_value, e_value, visibility
from .errors import ConfigError, CvBellError, NoPhotons
from .fitting import DEFAULT_INIT, fit
from .io import (
    estimate_to_dict,
    fit_result_to_dict,
    load_fit_input,
    read_records,
    rtable_to_dict,
    write_csv,
    write_json,
    write_records,
)
from .sampler import calibrate, sample_bell_run

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_PHOTONS = 3
EXIT_NO_CONVERGENCE = 4


def _add_common(parser: argparse.ArgumentParser, out_help: str) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON config file (defaults apply when omitted)")
    parser.add_argument("--out", type=Path, default=None, help=out_help)
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--threads", type=int, default=0,
                        help="compute threads for the compiled kernels "
                             "(0 keeps the backend default)")


def _load_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if args.config is not None:
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    config = config_from_dict(data)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    if args.threads and args.threads > 0 and kernels.USE_NUMBA:
        import numba

        numba.set_num_threads(args.threads)
    return config


def _parse_grid(text: str) -> np.ndarray:
    """Parse "start:stop:num" (inclusive linspace) or a comma list."""
    try:
        if ":" in text:
            start, stop, num = text.split(":")
            grid = np.linspace(float(start), float(stop), int(num))
        else:
            grid = np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ConfigError(
            f"grid {text!r} is neither start:stop:num nor a comma list"
        ) from exc
    if grid.size == 0:
        raise ConfigError("grid is empty")
    return grid


def _emit(text: str, out: Path | None) -> None:
    """Echo payload text to stdout when no output path was given."""
    if out is None:
        sys.stdout.write(text)


def _tables_for_config(config: RunConfig):
    gamma4 = build_bell_state(config.circuit_config())
    return [
        r_table(analyze_state(gamma4, ta, tb)) for ta, tb in config.angles.pairs()
    ]


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    tables = _tables_for_config(config)
    e_values = [e_value(t) for t in tables]
    payload = {
        "b": bell_value(e_values),
        "e_values": e_values,
        "angle_pairs": [list(pair) for pair in config.angles.pairs()],
        "r_tables": [rtable_to_dict(t) for t in tables],
        "config": config.to_dict(),
    }
    text = write_json(payload, "results", args.out)
    _emit(text, args.out)
    print(f"B = {payload['b']:.6f}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _load_config(args)
    grid = _parse_grid(args.grid)
    rows = {"sweep_value": [], "b": [], "e1": [], "e2": [], "e3": [], "e4": []}
    for value in grid:
        swept = config.replace(**{args.param: float(value)})
        tables = _tables_for_config(swept)
        e_values = [e_value(t) for t in tables]
        rows["sweep_value"].append(float(value))
        rows["b"].append(bell_value(e_values))
        for index, e in enumerate(e_values, start=1):
            rows[f"e{index}"].append(e)
    columns = {key: np.asarray(vals) for key, vals in rows.items()}
    if args.out is not None:
        write_csv(args.out, columns)
    else:
        import pandas as pd

        sys.stdout.write(
            pd.DataFrame(columns).to_csv(index=False, float_format="%.12g")
        )
    print(f"swept {args.param} over {grid.size} points", file=sys.stderr)
    return EXIT_OK


def cmd_fringe(args: argparse.Namespace) -> int:
    config = _load_config(args)
    grid = (
        _parse_grid(args.grid) if args.grid is not None
        else np.linspace(0.0, np.pi, 64)
    )
    columns = fringe(config.circuit_config(), args.theta_a, grid)
    vis = visibility(columns["theta_b"], columns["p_pp"])
    if args.out is not None:
        write_csv(args.out, columns)
        sidecar = args.out.parent / (args.out.stem + ".visibility.json")
        write_json(
            {
                "theta_a": float(args.theta_a),
                "visibility": vis,
                "n_points": int(grid.size),
            },
            "visibility",
            sidecar,
        )
    else:
        import pandas as pd

        sys.stdout.write(
            pd.DataFrame(columns).to_csv(index=False, float_format="%.12g")
        )
    print(f"P++ visibility at theta_a={args.theta_a:g}: {vis:.6f}",
          file=sys.stderr)
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    if args.out is None:
        raise ConfigError("sample requires --out DIRECTORY")
    config = _load_config(args)
    gamma4 = build_bell_state(config.sampling_circuit_config())
    record_sets = sample_bell_run(
        gamma4, config.angles, config.n_samples, config.noise_config(), config.seed
    )
    write_records(args.out, record_sets, config.to_dict())
    print(
        f"wrote {4 * len(record_sets)} record files "
        f"({config.n_samples} samples each) to {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    record_sets, metadata = read_records(args.records)
    if not record_sets[0].normalized:
        record_sets = [calibrate(rs, keep_raw=False) for rs in record_sets]
    echo = metadata.get("config", {})
    n_boot = int(echo.get("n_boot", 200))
    seed = int(echo.get("seed", metadata["seed"]))
    if args.config is not None:
        override = config_from_dict(json.loads(Path(args.config).read_text()))
        n_boot, seed = override.n_boot, override.seed
    if args.seed is not None:
        seed = args.seed
    if args.threads and args.threads > 0 and kernels.USE_NUMBA:
        import numba

        numba.set_num_threads(args.threads)
    estimate = bootstrap(record_sets, n_boot=n_boot, seed=seed)
    payload = estimate_to_dict(estimate, config_echo=echo or None)
    text = write_json(payload, "estimate", args.out)
    _emit(text, args.out)
    sigma = estimate.sigma_above_2
    sigma_text = f"{sigma:.1f}" if sigma is not None else "n/a"
    print(
        f"B = {estimate.b_mean:.4f} +/- {estimate.b_std:.4f} "
        f"({sigma_text} sigma above 2)",
        file=sys.stderr,
    )
    return EXIT_OK


def _parse_init(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 4:
        raise ConfigError("--init needs eta,epsilon,v_sqz,v_asqz")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"--init values must be numbers: {exc}") from exc


def cmd_fit(args: argparse.Namespace) -> int:
    measured, file_init = load_fit_input(args.tables)
    init = _parse_init(args.init) if args.init is not None else file_init
    init_used = init if init is not None else DEFAULT_INIT
    result = fit(measured, init=init, record_trace=args.trace)
    payload = fit_result_to_dict(result, init=init_used)
    text = write_json(payload, "fit_result", args.out)
    _emit(text, args.out)
    print(
        f"eta={result.eta:.4f} epsilon={result.epsilon:.4f} "
        f"v_sqz={result.v_sqz:.4f} v_asqz={result.v_asqz:.4f} "
        f"residual={result.residual:.3e} converged={result.converged}",
        file=sys.stderr,
    )
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvbell",
        description="Continuous-variable Bell-test simulator and analyzer",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="closed-form Bell value for a config")
    _add_common(p, "results JSON path (stdout when omitted)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="closed-form B over a parameter grid")
    _add_common(p, "sweep CSV path (stdout when omitted)")
    p.add_argument(
        "--param",
        required=True,
        choices=["squeezing_db", "dark_clearance_db", "eta", "purity"],
        help="config field to sweep",
    )
    p.add_argument("--grid", required=True,
                   help="start:stop:num (inclusive) or comma-separated values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fringe", help="coincidence fringes vs analyzer angle")
    _add_common(p, "fringe CSV path (stdout when omitted); a "
                   "*.visibility.json sidecar is written next to it")
    p.add_argument("--theta-a", type=float, default=np.pi / 8,
                   help="fixed analyzer angle on side A in radians "
                        "(default pi/8)")
    p.add_argument("--grid", default=None,
                   help="theta_B grid, start:stop:num or comma list "
                        "(default 0:pi:64)")
    p.set_defaults(func=cmd_fringe)

    p = sub.add_parser("sample", help="synthesize homodyne records")
    _add_common(p, "output directory for record CSVs and metadata.json")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("analyze", help="bootstrap Bell estimate from records")
    _add_common(p, "estimate JSON path (stdout when omitted)")
    p.add_argument("--records", type=Path, required=True,
                   help="directory written by `cvbell sample`")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit model parameters to R tables")
    _add_common(p, "fit-result JSON path (stdout when omitted)")
    p.add_argument("--tables", type=Path, required=True,
                   help="fit-input JSON with angle_pairs and r_tables")
    p.add_argument("--init", default=None,
                   help="starting point eta,epsilon,v_sqz,v_asqz "
                        "(falls back to the tables file's init, then "
                        f"{','.join(str(v) for v in DEFAULT_INIT)})")
    p.add_argument("--trace", action="store_true",
                   help="include the objective trace in the result")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoPhotons as exc:
        payload = {"error": "no_photons", "message": str(exc)}
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
        sys.stdout.write(text)
        out = getattr(args, "out", None)
        if out is not None:
            Path(out).write_text(text)
        return EXIT_NO_PHOTONS
    except (CvBellError, jsonschema.ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

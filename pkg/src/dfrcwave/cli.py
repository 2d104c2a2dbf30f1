"""Command-line front end.

Commands: ``synth`` (one waveform + metrics), ``ser`` (symbol error rate
curves), ``radar`` (detection probability + beampattern curves), ``sweep``
(rho trade-off table). Every option can come from a flat ``key = value``
config file (--config); explicit command-line flags win. Each run writes a
``manifest.json`` next to its outputs with the fully resolved configuration.

Exit codes: 0 success, 2 configuration error, 3 solver failure budget
exceeded, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .metrics import beampattern, constant_modulus_error, mui_energy, orthogonality_error
from .sim import (
    Method,
    Scenario,
    SolverBudgetError,
    gen_channel,
    gen_symbols,
    run_radar_experiment,
    run_ser_experiment,
    run_tradeoff_sweep,
)
from .solvers import (
    BacktrackExhaustedError,
    SolverConfig,
    altmin,
    build_stacked,
    devectorize,
    rcg_solve,
    solve_mui_orthogonal,
    vectorize_problem,
)
from . import sim as _sim

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

ALL_METHODS = "closed-form,cm-rcg,cm-altmin,cm-zf"


class ConfigError(ValueError):
    """Bad configuration file or option value."""


def _parse_float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated number list, got {text!r}") from exc


def _parse_methods(text: str) -> tuple:
    out = []
    for name in text.split(","):
        name = name.strip()
        if not name:
            continue
        try:
            out.append(Method(name))
        except ValueError as exc:
            valid = ", ".join(m.value for m in Method)
            raise ConfigError(f"unknown method {name!r} (valid: {valid})") from exc
    if not out:
        raise ConfigError("no methods given")
    return tuple(out)


# name -> (parser from string, default); defaults resolve after config merge
_OPTIONS = {
    "n": (int, 16),
    "k": (int, 4),
    "l": (int, 32),
    "power": (float, 1.0),
    "rho": (float, 0.1),
    "snr-db": (_parse_float_list, tuple(float(s) for s in range(0, 20, 2))),
    "frames": (int, 200),
    "method": (str, None),
    "methods": (_parse_methods, _parse_methods(ALL_METHODS)),
    "rho-grid": (_parse_float_list, (0.1, 0.3, 0.5, 0.7, 0.9)),
    "seed": (int, 1),
    "channel-seed": (int, None),
    "symbol-seed": (int, None),
    "noise-seed": (int, None),
    "solver-seed": (int, None),
    "epsilon": (float, 1e-4),
    "k-max": (int, 2000),
    "eta": (float, 1e-3),
    "n-max": (int, 100),
    "workers": (int, 1),
    "out": (str, "."),
}


def _read_config(path: str) -> dict:
    """Flat ``key = value`` file; blank lines and # comments allowed."""
    raw = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _OPTIONS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        raw[key] = value.strip()
    return raw


def _resolve_options(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and explicit flags (flags win)."""
    config = _read_config(args.config) if args.config else {}
    resolved = {}
    for name, (parse, default) in _OPTIONS.items():
        attr = name.replace("-", "_")
        cli_value = getattr(args, attr, None)
        if cli_value is not None:
            resolved[name] = parse(cli_value) if isinstance(cli_value, str) else cli_value
        elif name in config:
            try:
                resolved[name] = parse(config[name])
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"bad config value for {name}: {config[name]!r}") from exc
        else:
            resolved[name] = default
    # derive the seed family from the base seed where not explicitly set
    base = resolved["seed"]
    for offset, key in enumerate(("channel-seed", "symbol-seed", "noise-seed", "solver-seed")):
        if resolved[key] is None:
            resolved[key] = base + offset
    return resolved


def _solver_config(opt: dict) -> SolverConfig:
    try:
        return SolverConfig(
            epsilon=opt["epsilon"],
            k_max=opt["k-max"],
            eta=opt["eta"],
            n_max=opt["n-max"],
            seed=opt["solver-seed"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _scenario(opt: dict, method: Method) -> Scenario:
    try:
        return Scenario(
            n_antennas=opt["n"],
            n_users=opt["k"],
            frame_length=opt["l"],
            total_power=opt["power"],
            rho=opt["rho"],
            snr_grid_db=opt["snr-db"],
            n_frames=opt["frames"],
            method=method,
            solver=_solver_config(opt),
            channel_seed=opt["channel-seed"],
            symbol_seed=opt["symbol-seed"],
            noise_seed=opt["noise-seed"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_manifest(outdir: Path, command: str, opt: dict, duration: float,
                    failures: dict) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "options": {
            k: (list(v) if isinstance(v, tuple) else
                v.value if isinstance(v, Method) else v)
            for k, v in opt.items()
            if k != "methods"
        },
        "methods": [m.value for m in opt["methods"]],
        "duration_seconds": duration,
        "failures": failures,
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _outdir(opt: dict) -> Path:
    path = Path(opt["out"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_synth(args: argparse.Namespace) -> int:
    opt = _resolve_options(args)
    if opt["method"] is None:
        raise ConfigError("synth requires --method (or a 'method' config entry)")
    try:
        method = Method(opt["method"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    outdir = _outdir(opt)
    started = time.perf_counter()
    sc = _scenario(opt, method)
    H = gen_channel(sc.n_users, sc.n_antennas,
                    np.random.SeedSequence([sc.channel_seed, 0, 0]))
    S = gen_symbols(sc.n_users, sc.frame_length,
                    np.random.SeedSequence([sc.symbol_seed, 0, 0]))
    n, l, p = sc.n_antennas, sc.frame_length, sc.total_power

    trace = []
    if method is Method.CLOSED_FORM:
        X = solve_mui_orthogonal(H, S, p)
        trace = [mui_energy(H, X, S)]
    elif method is Method.CM_ZF:
        X = _sim.cm_zf_waveform(H, S, p)
    elif method is Method.CM_RCG:
        u = _sim.fixed_auxiliary_unitary(n, l, p)
        obj = vectorize_problem(build_stacked(H, S, u, sc.rho, p))
        rng = np.random.default_rng(np.random.SeedSequence([sc.solver.seed, 0, 0]))
        x0 = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n * l))
        x, _, _, rcg_trace = rcg_solve(obj, x0, sc.solver, collect_trace=True)
        X = devectorize(x, n, l, p)
        trace = [float(v) for v in rcg_trace]
    else:
        rng = np.random.default_rng(np.random.SeedSequence([sc.solver.seed, 0, 0]))
        x0 = np.sqrt(p / n) * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, (n, l)))
        result = altmin(H, S, sc.rho, p, sc.solver, x0=x0)
        X = result.waveform
        trace = [float(v) for v in result.objective_trace]

    rows = [[f"{float(x.real)!r},{float(x.imag)!r}" for x in row] for row in X]
    with open(outdir / "waveform.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in rows:
            writer.writerow(row)
    metrics = {
        "mui_energy": mui_energy(H, X, S),
        "orthogonality_error": orthogonality_error(X, p),
        "constant_modulus_error": constant_modulus_error(X, p),
        "objective_trace": trace,
    }
    with open(outdir / "metrics.json", "w") as fh:
        json.dump(metrics, fh, indent=2)
        fh.write("\n")
    _write_manifest(outdir, "synth", opt, time.perf_counter() - started, {})
    print(f"synth {method.value}: N={n} K={sc.n_users} L={l} "
          f"mui={metrics['mui_energy']:.6g} "
          f"orth_err={metrics['orthogonality_error']:.3g} "
          f"cm_err={metrics['constant_modulus_error']:.3g} "
          f"-> {outdir / 'waveform.csv'}")
    return EXIT_OK


def cmd_ser(args: argparse.Namespace) -> int:
    opt = _resolve_options(args)
    outdir = _outdir(opt)
    started = time.perf_counter()
    rows = []
    failures = {}
    for method in opt["methods"]:
        sc = _scenario(opt, method)
        stats = {}
        points = run_ser_experiment(sc, workers=opt["workers"], stats=stats)
        failures[method.value] = stats.get("failures", 0)
        for pt in points:
            rows.append([pt.snr_db, pt.value, pt.n_samples, pt.ci_halfwidth, method.value])
    _write_csv(outdir / "ser.csv",
               ["snr_db", "ser", "n_symbols", "ci_halfwidth", "method"], rows)
    _write_manifest(outdir, "ser", opt, time.perf_counter() - started, failures)
    print(f"ser: {len(rows)} points over {len(opt['methods'])} methods "
          f"({opt['frames']} frames each) -> {outdir / 'ser.csv'}")
    return EXIT_OK


def cmd_radar(args: argparse.Namespace) -> int:
    opt = _resolve_options(args)
    outdir = _outdir(opt)
    started = time.perf_counter()
    pd_rows = []
    beam_rows = []
    failures = {}
    for method in opt["methods"]:
        sc = _scenario(opt, method)
        stats = {}
        points, mean_cov = run_radar_experiment(
            sc, workers=opt["workers"], with_covariance=True, stats=stats)
        failures[method.value] = stats.get("failures", 0)
        for pt in points:
            pd_rows.append([pt.snr_db, pt.value, method.value])
        curve = beampattern(mean_cov)
        for angle, power in zip(curve.angles_deg, curve.power_watts):
            beam_rows.append([angle, power, method.value])
    _write_csv(outdir / "radar.csv", ["snr_db", "pd", "method"], pd_rows)
    _write_csv(outdir / "beampattern.csv",
               ["angle_deg", "power_watts", "method"], beam_rows)
    _write_manifest(outdir, "radar", opt, time.perf_counter() - started, failures)
    print(f"radar: {len(pd_rows)} detection points, {len(beam_rows)} beampattern "
          f"points -> {outdir / 'radar.csv'}, {outdir / 'beampattern.csv'}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    opt = _resolve_options(args)
    outdir = _outdir(opt)
    started = time.perf_counter()
    sc = _scenario(opt, Method.CM_ALTMIN)
    stats = {}
    table = run_tradeoff_sweep(sc, opt["rho-grid"], workers=opt["workers"], stats=stats)
    rows = [[rho, mean_mui, mean_orth] for rho, mean_mui, mean_orth in table]
    _write_csv(outdir / "sweep.csv", ["rho", "mean_mui", "mean_orth_err"], rows)
    _write_manifest(outdir, "sweep", opt, time.perf_counter() - started,
                    {"cm-altmin": stats.get("failures", 0)})
    print(f"sweep: {len(rows)} rho points ({opt['frames']} frames each) "
          f"-> {outdir / 'sweep.csv'}")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--out", help="output directory (default .)")
    parser.add_argument("--seed", type=int, help="base seed for the stream family")
    parser.add_argument("--workers", type=int, help="worker processes (default 1)")
    parser.add_argument("--n", type=int, help="transmit antennas N")
    parser.add_argument("--k", type=int, help="downlink users K")
    parser.add_argument("--l", type=int, help="frame length L")
    parser.add_argument("--power", type=float, help="total transmit power P_T")
    parser.add_argument("--rho", type=float, help="communication weight in [0, 1]")
    parser.add_argument("--frames", type=int, help="Monte-Carlo frames per point")
    parser.add_argument("--snr-db", help="comma-separated SNR grid in dB")
    parser.add_argument("--channel-seed", type=int)
    parser.add_argument("--symbol-seed", type=int)
    parser.add_argument("--noise-seed", type=int)
    parser.add_argument("--solver-seed", type=int)
    parser.add_argument("--epsilon", type=float, help="RCG gradient tolerance")
    parser.add_argument("--k-max", type=int, help="RCG iteration cap")
    parser.add_argument("--eta", type=float, help="AltMin objective tolerance")
    parser.add_argument("--n-max", type=int, help="AltMin outer iteration cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfrcwave",
        description="Constant-modulus dual-function radar-communication waveforms",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="synthesize one waveform and its metrics")
    _add_common(p_synth)
    p_synth.add_argument("--method", help="one of " + ALL_METHODS)
    p_synth.set_defaults(func=cmd_synth)

    p_ser = sub.add_parser("ser", help="Monte-Carlo symbol error rate curves")
    _add_common(p_ser)
    p_ser.add_argument("--methods", help="comma list, default " + ALL_METHODS)
    p_ser.set_defaults(func=cmd_ser)

    p_radar = sub.add_parser("radar", help="detection probability and beampattern")
    _add_common(p_radar)
    p_radar.add_argument("--methods", help="comma list, default " + ALL_METHODS)
    p_radar.set_defaults(func=cmd_radar)

    p_sweep = sub.add_parser("sweep", help="rho trade-off table for cm-altmin")
    _add_common(p_sweep)
    p_sweep.add_argument("--rho-grid", help="comma-separated rho values")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverBudgetError, BacktrackExhaustedError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Usage examples::

    cavbistab spectrum --gN 1.2 --gamma 0.0022 --natoms 200000 --neta 12100 \\
        --axis delta_a --range -2.2:2.2:2001 --delta-ca 0
    cavbistab boundaries --gN 1.2 --gamma 0.0022 --natoms 200000
    cavbistab phase-diagram --gN 12.4 --natoms 10000 --threads 8 -o diagram.csv

Parameters may also come from a flat ``key = value`` file given with
``--config``; command-line flags take precedence.  The default worker count
comes from the ``CAVBISTAB_THREADS`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io as cio
from .dynamics import IntegrationError, IntegratorControls, MeanFieldState, RampSpec, integrate
from .params import ParameterError, SystemParams, derive, from_physical
from .phases import boundaries, default_gamma_grid, default_pump_grid, phase_diagram
from .spectra import branch_follow, count_transitions, pump_bifurcation, scan_spectrum, solution_counts
from .steadystate import ConvergenceError, SpuriousRootError, steady_states

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

COMMANDS = ("spectrum", "bifurcation", "hysteresis", "phase-diagram", "population-map", "boundaries", "dynamics")

# option name -> (config key aliases)
PARAM_KEYS = {
    "g": ("g",),
    "gN": ("gn", "g_n", "gN"),
    "gamma": ("gamma",),
    "kappa": ("kappa",),
    "natoms": ("natoms", "n_atoms", "N"),
    "eta": ("eta", "eta_plus"),
    "neta": ("neta", "n_eta"),
    "eta_minus": ("eta_minus", "eta-minus"),
    "delta_a": ("delta_a", "delta-a"),
    "delta_c": ("delta_c", "delta-c"),
    "delta_ca": ("delta_ca", "delta-ca"),
    "units": ("units",),
}
RANGE_OPTIONS = ("--range", "--gamma-range", "--neta-range")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# parsing helpers


def parse_range(text: str, scale: str = "linear") -> np.ndarray:
    """``start:stop:count`` -> grid (linear or log spacing)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"range must look like start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"bad range {text!r}: {exc}") from None
    if count < 2:
        raise ConfigError("grid count must be at least 2")
    if not stop > start:
        raise ConfigError("range stop must exceed start")
    if scale == "log":
        if start <= 0:
            raise ConfigError("log ranges need positive bounds")
        return np.logspace(math.log10(start), math.log10(stop), count)
    return np.linspace(start, stop, count)


def read_config(path: str) -> dict[str, str]:
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _config_value(cfg: dict, name: str):
    for alias in PARAM_KEYS.get(name, (name,)):
        key = alias.replace("-", "_")
        if key in cfg:
            return cfg[key]
        if key.lower() in cfg:
            return cfg[key.lower()]
    return None


def _merged(args, cfg: dict, name: str, cast=float):
    value = getattr(args, name, None)
    if value is None:
        value = _config_value(cfg, name)
    if value is None:
        return None
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for {name}: {value!r}") from None


def _merged_option(args, cfg: dict, name: str, default):
    value = getattr(args, name, None)
    if value is None:
        value = cfg.get(name, default)
    return value


def build_params(args, cfg: dict, gamma_optional: bool = False, require_n_and_g: bool = False) -> SystemParams:
    g = _merged(args, cfg, "g")
    g_n = _merged(args, cfg, "gN")
    gamma = _merged(args, cfg, "gamma")
    kappa = _merged(args, cfg, "kappa") or 1.0
    natoms = _merged(args, cfg, "natoms", lambda v: int(float(v)))
    eta = _merged(args, cfg, "eta")
    neta = _merged(args, cfg, "neta")
    eta_minus = _merged(args, cfg, "eta_minus") or 0.0
    delta_a = _merged(args, cfg, "delta_a")
    delta_c = _merged(args, cfg, "delta_c")
    delta_ca = _merged(args, cfg, "delta_ca")
    units = _merged(args, cfg, "units", str) or "kappa"

    if g is not None and g_n is not None:
        raise ConfigError("give either --g or --gN, not both")
    if g is None and g_n is None:
        raise ConfigError("a coupling (--g or --gN) is required")
    if g_n is not None and not natoms:
        raise ConfigError("--gN needs --natoms")
    if require_n_and_g and not natoms:
        raise ConfigError("phase diagrams need both the coupling and --natoms")
    if gamma is None:
        if not gamma_optional:
            raise ConfigError("--gamma is required")
        gamma = kappa
    if eta is not None and neta is not None:
        raise ConfigError("give either --eta or --neta, not both")
    if neta is not None:
        if neta < 0:
            raise ConfigError("--neta must be non-negative")
        eta = kappa * math.sqrt(neta)
    eta = eta or 0.0
    provided = [v is not None for v in (delta_a, delta_c, delta_ca)]
    if all(provided):
        raise ConfigError("at most two of --delta-a, --delta-c, --delta-ca may be given")
    if delta_ca is not None:
        if delta_c is not None:
            delta_a = delta_c + delta_ca
        else:
            delta_a = delta_a or 0.0
            delta_c = delta_a - delta_ca
    delta_a = delta_a or 0.0
    delta_c = delta_c or 0.0
    try:
        return from_physical(
            g=g,
            gamma=gamma,
            kappa=kappa,
            units=units,
            n_atoms=natoms or 0,
            g_n=g_n,
            eta_plus=eta,
            eta_minus=eta_minus,
            delta_a=delta_a,
            delta_c=delta_c,
        )
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None


def _normalize_argv(argv: list[str]) -> list[str]:
    """Glue values that start with '-' to range options (``--range -2:2:11``)."""
    out = []
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg in RANGE_OPTIONS and i + 1 < len(argv):
            out.append(f"{arg}={argv[i + 1]}")
            i += 2
            continue
        out.append(arg)
        i += 1
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavbistab", description="Optical bistability of atoms in a driven ring cavity.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value parameter file")
    common.add_argument("--g", type=float, help="single-atom coupling")
    common.add_argument("--gN", type=float, help="collective coupling g*sqrt(N)")
    common.add_argument("--gamma", type=float, help="atomic decay rate")
    common.add_argument("--kappa", type=float, help="cavity field decay rate (default 1)")
    common.add_argument("--natoms", type=lambda v: int(float(v)), help="atom number")
    common.add_argument("--eta", type=float, help="forward pump rate")
    common.add_argument("--neta", type=float, help="empty-cavity photon number (eta/kappa)^2")
    common.add_argument("--eta-minus", dest="eta_minus", type=float)
    common.add_argument("--delta-a", dest="delta_a", type=float)
    common.add_argument("--delta-c", dest="delta_c", type=float)
    common.add_argument("--delta-ca", dest="delta_ca", type=float)
    common.add_argument("--units", choices=("kappa", "ordinary", "angular"))
    common.add_argument("-o", "--output", help="output file (default: standard output)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--threads", type=int, help="worker processes (0 = one per CPU)")

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text)

    for name, help_text in (("spectrum", "multi-branch spectrum"), ("hysteresis", "quasi-static up/down sweeps")):
        p = add(name, help_text)
        p.add_argument("--axis", choices=("delta_a", "delta_ca", "pump"))
        p.add_argument("--range", dest="range_", metavar="START:STOP:COUNT")
        p.add_argument("--scale", choices=("linear", "log"))
        p.add_argument("--hold", choices=("delta_ca", "delta_c"))
        p.add_argument("--no-stability", action="store_true")
        if name == "hysteresis":
            p.add_argument("--start-hint", default="max", help="max, min or a photon number")
            p.add_argument("--start-x", type=float)

    p = add("bifurcation", "photon number versus s1*n_eta")
    p.add_argument("--range", dest="range_", metavar="START:STOP:COUNT", help="grid in s1*n_eta")
    p.add_argument("--scale", choices=("linear", "log"))
    p.add_argument("--no-stability", action="store_true")

    for name, help_text in (("phase-diagram", "classify the (gamma/2kappa, n_eta) plane"), ("population-map", "maximum excited population map")):
        p = add(name, help_text)
        p.add_argument("--gamma-range", metavar="START:STOP:COUNT", help="gamma/2kappa grid")
        p.add_argument("--neta-range", metavar="START:STOP:COUNT", help="n_eta grid")
        p.add_argument("--scale", choices=("linear", "log"))
        p.add_argument("--points", type=int, help="detuning samples per cell")

    add("boundaries", "analytic phase boundaries")

    p = add("dynamics", "integrate the mean-field equations")
    p.add_argument("--t-end", dest="t_end", type=float, help="final time in units of 1/kappa")
    p.add_argument("--samples", type=int, help="number of output samples")
    p.add_argument("--initial", choices=("ground", "low", "high"), help="initial state")
    p.add_argument("--ramp-axis", choices=("delta_a", "pump"))
    p.add_argument("--ramp-start", type=float)
    p.add_argument("--ramp-stop", type=float)
    p.add_argument("--ramp-duration", type=float)
    p.add_argument("--hold", choices=("delta_ca", "delta_c"))
    p.add_argument("--method", help="scipy integrator (default DOP853)")
    p.add_argument("--rtol", type=float)
    return parser


# ---------------------------------------------------------------------------
# metadata


def base_metadata(command: str, params: SystemParams, extra: dict | None = None) -> dict:
    meta = {
        "tool": "cavbistab",
        "version": __version__,
        "command": command,
        "params": {
            "g": params.g,
            "gamma": params.gamma,
            "kappa": params.kappa,
            "n_atoms": params.n_atoms,
            "eta_plus": params.eta_plus,
            "eta_minus": params.eta_minus,
            "delta_a": params.delta_a,
            "delta_c": params.delta_c,
            "delta_ca": params.delta_ca,
            "g_n": params.g_n,
        },
        "derived": derive(params).as_dict(),
    }
    if extra:
        meta.update(extra)
    return meta


def _emit(args, fmt_default: str, write_csv, json_payload, metadata: dict) -> None:
    fmt = args.format or fmt_default
    target = args.output
    if target is None:
        buf = sys.stdout
        if fmt == "csv":
            write_csv(buf, metadata)
        else:
            cio.write_json(buf, metadata, json_payload())
        return
    if fmt == "csv":
        write_csv(target, metadata)
    else:
        cio.write_json(target, metadata, json_payload())


# ---------------------------------------------------------------------------
# commands


def _spectrum_grid(args, cfg, params):
    axis = _merged_option(args, cfg, "axis", "delta_a")
    scale = _merged_option(args, cfg, "scale", "log" if axis == "pump" else "linear")
    text = getattr(args, "range_", None) or cfg.get("range")
    if text is None:
        if axis == "pump":
            text = "1e2:1e7:2000"
        else:
            half = 2.0 * params.g_n + 5.0 * params.gamma + 2.0 * params.kappa
            text = f"{-half!r}:{half!r}:2001"
    return axis, scale, parse_range(text, scale)


def cmd_spectrum(args, cfg):
    params = build_params(args, cfg)
    axis, scale, grid = _spectrum_grid(args, cfg, params)
    hold = _merged_option(args, cfg, "hold", "delta_ca")
    branches = scan_spectrum(params, axis, grid, hold=hold, with_stability=not args.no_stability)
    meta = base_metadata("spectrum", params, {"axis": axis, "hold": hold, "grid": {"scale": scale, "start": grid[0], "stop": grid[-1], "count": len(grid)}})
    _emit(args, "csv", lambda t, m: cio.write_spectrum_csv(t, branches, m), lambda: cio.spectrum_json(branches), meta)


def cmd_bifurcation(args, cfg):
    params = build_params(args, cfg)
    scale = _merged_option(args, cfg, "scale", "log")
    grid = parse_range(getattr(args, "range_", None) or cfg.get("range") or "1e2:1e7:2000", scale)
    branches = pump_bifurcation(params, grid, params.delta_a, params.delta_c, with_stability=not args.no_stability)
    counts = solution_counts(params, grid, params.delta_a, params.delta_c)
    transitions = [
        {"s_eta": tr.location, "before": tr.count_before, "after": tr.count_after} for tr in count_transitions(grid, counts)
    ]
    meta = base_metadata(
        "bifurcation",
        params,
        {"axis": "pump", "transitions": transitions, "grid": {"scale": scale, "start": grid[0], "stop": grid[-1], "count": len(grid)}},
    )
    _emit(
        args,
        "csv",
        lambda t, m: cio.write_spectrum_csv(t, branches, m),
        lambda: {**cio.spectrum_json(branches), "counts": counts, "grid": grid},
        meta,
    )


def cmd_hysteresis(args, cfg):
    params = build_params(args, cfg)
    axis, scale, grid = _spectrum_grid(args, cfg, params)
    hold = _merged_option(args, cfg, "hold", "delta_ca")
    branches = scan_spectrum(params, axis, grid, hold=hold, with_stability=False)
    hint = args.start_hint
    if hint not in ("max", "min"):
        try:
            hint = float(hint)
        except ValueError:
            raise ConfigError("--start-hint must be max, min or a number") from None
    traces = [branch_follow(branches, d, hint, args.start_x) for d in ("up", "down")]
    meta = base_metadata("hysteresis", params, {"axis": axis, "hold": hold, "start_hint": hint, "start_x": args.start_x})
    _emit(
        args,
        "csv",
        lambda t, m: cio.write_hysteresis_csv(t, traces, m),
        lambda: {"traces": [{"direction": t.direction, "x": t.x, "n": t.n, "branch_id": t.branch_ids, "jump_points": t.jump_points} for t in traces]},
        meta,
    )


def _diagram(args, cfg, population_only: bool):
    params = build_params(args, cfg, gamma_optional=True, require_n_and_g=True)
    scale = _merged_option(args, cfg, "scale", "log")
    gtext = args.gamma_range or cfg.get("gamma_range")
    ntext = args.neta_range or cfg.get("neta_range")
    gamma_grid = parse_range(gtext, scale) if gtext else default_gamma_grid()
    pump_grid = parse_range(ntext, scale) if ntext else default_pump_grid()
    points = int(_merged_option(args, cfg, "points", 2001))
    threads = args.threads if args.threads is not None else (int(cfg["threads"]) if "threads" in cfg else None)
    diagram = phase_diagram(params, gamma_grid, pump_grid, points=points, threads=threads)
    meta = base_metadata(
        "population-map" if population_only else "phase-diagram",
        params,
        {"points": points, "notes": {"merge_n_eta": "empirical boundary"}},
    )
    meta.pop("derived")  # gamma varies across the diagram
    _emit(
        args,
        "csv",
        lambda t, m: cio.write_diagram_csv(t, diagram, m, population_only),
        lambda: cio.diagram_json(diagram, population_only),
        meta,
    )


def cmd_boundaries(args, cfg):
    params = build_params(args, cfg)
    b = boundaries(params)
    meta = base_metadata("boundaries", params, {"notes": {"merge_n_eta": "empirical boundary"}})

    def write_csv(target, m):
        rows = [[k, "" if v is None else cio.fmt(v)] for k, v in b.as_dict().items()]
        cio._write_csv(target, m, ("name", "value"), rows)

    _emit(args, "json", write_csv, lambda: b.as_dict(), meta)


def cmd_dynamics(args, cfg):
    params = build_params(args, cfg)
    t_end = float(_merged_option(args, cfg, "t_end", 100.0))
    samples = int(_merged_option(args, cfg, "samples", 201))
    initial = _merged_option(args, cfg, "initial", "ground")
    method = _merged_option(args, cfg, "method", "DOP853")
    rtol = float(_merged_option(args, cfg, "rtol", 1e-8))
    ramp = None
    axis = _merged_option(args, cfg, "ramp_axis", None)
    if axis is not None:
        try:
            ramp = RampSpec(
                axis,
                float(_merged_option(args, cfg, "ramp_start", None)),
                float(_merged_option(args, cfg, "ramp_stop", None)),
                float(_merged_option(args, cfg, "ramp_duration", t_end)),
                _merged_option(args, cfg, "hold", "delta_ca"),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad ramp specification: {exc}") from None
    if initial == "ground":
        state0 = MeanFieldState.ground()
    else:
        start = params
        if ramp is not None:
            da, dc, eta = ramp.apply(params, 0.0)
            start = params.replace(delta_a=da, delta_c=dc, eta_plus=eta)
        sols = steady_states(start)
        if not sols:
            raise ConfigError("no steady state to start from")
        state0 = MeanFieldState.from_steady(start, sols[0] if initial == "low" else sols[-1])
    controls = IntegratorControls(rtol=rtol, atol=rtol * 1e-2, method=method, n_samples=samples)
    traj = integrate(state0, params, ramp, t_end, controls)
    meta = base_metadata(
        "dynamics",
        params,
        {"t_end": t_end, "initial": initial, "method": method, "rtol": rtol, "ramp": None if ramp is None else ramp.__dict__},
    )
    _emit(
        args,
        "csv",
        lambda t, m: cio.write_trajectory_csv(t, traj.t, traj.y, m),
        lambda: {"t": traj.t, "y": traj.y, "layout": ["re_sigma_minus", "im_sigma_minus", "sigma_z", "re_alpha", "im_alpha"]},
        meta,
    )


HANDLERS = {
    "spectrum": cmd_spectrum,
    "bifurcation": cmd_bifurcation,
    "hysteresis": cmd_hysteresis,
    "phase-diagram": lambda a, c: _diagram(a, c, False),
    "population-map": lambda a, c: _diagram(a, c, True),
    "boundaries": cmd_boundaries,
    "dynamics": cmd_dynamics,
}


def run(argv: list[str] | None = None) -> int:
    """Parse ``argv`` and execute one command; returns the process exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_normalize_argv(argv))
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    started = time.perf_counter()
    try:
        cfg = read_config(args.config) if args.config else {}
        HANDLERS[args.command](args, cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"cavbistab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, IntegrationError, SpuriousRootError, FloatingPointError, np.linalg.LinAlgError) as exc:
        where = getattr(exc, "t", None)
        suffix = f" (t = {where})" if where is not None else ""
        print(f"cavbistab: numerical failure: {exc}{suffix}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"cavbistab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cavbistab: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    wall = time.perf_counter() - started
    # wall time would break byte-identical outputs, so it goes to a sidecar file
    run_info = {"command": args.command, "wall_time_s": wall, "argv": argv, "version": __version__}
    if args.output:
        Path(str(args.output) + ".run.json").write_text(json.dumps(run_info, indent=1) + "\n", encoding="utf-8")
    else:
        print(f"cavbistab: {args.command} finished in {wall:.3f} s", file=sys.stderr)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

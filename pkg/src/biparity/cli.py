"""Command-line front end.

Subcommands: ``state``, ``scan``, ``simulate``, ``compare``, ``project``.
Settings come from built-in defaults, then an optional INI file given by
``--config`` (keys in a ``[biparity]`` section or at top level, spelled
like the long options), then the command line.

Exit codes: 0 success, 1 I/O error, 2 invalid input, 3 numerical guard.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .ensemble import (
    SCHEMA_VERSION,
    EnsembleConfig,
    initial_slope,
    run_ensemble,
    time_to_target,
)
from .linalg3 import svd3
from .pauli import (
    LABELS,
    StateValidationError,
    TwoQubitState,
    correlation_matrix,
    expected_bob_purity,
    preset,
    purity,
    reduced_bloch,
    validate,
)
from .scan import argmax_axis, axis_from_angles, rate_map, render_svg
from .sme import NumericalGuardError, SimParams
from .strategies import DegenerateStateError, StrategyConfig, parse_strategy

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "preset": "maximally_mixed",
    "file": None,
    "beta": None,
    "delta": None,
    "r_a": None,
    "r_b": None,
    "k": 0.1,
    "dt": 1e-3,
    "t_final": 1.0,
    "n_traj": 100,
    "seed": 0,
    "increments": "two_point",
    "allow_large_step": False,
    "stats_stride": 1,
    "workers": 1,
    "strategy": "jacobs",
    "strategies": "bob_opt,jacobs,along_bloch",
    "degeneracy_policy": "fallback_nested",
    "target": 0.9,
    "zenith_count": 181,
    "azimuth_count": 361,
    "grid_points": 100_000,
    "out": None,
    "svg": None,
    "save": None,
    "format": None,
}
INT_KEYS = {"n_traj", "seed", "stats_stride", "zenith_count", "azimuth_count", "grid_points"}
FLOAT_KEYS = {"k", "dt", "t_final", "target", "beta", "delta"}
BOOL_KEYS = {"allow_large_step"}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def parse_angle(text):
    """Radians by default; a ``deg`` suffix means degrees."""
    text = str(text).strip()
    if text.endswith("deg"):
        return math.radians(float(text[:-3]))
    return float(text)


def parse_vec(text):
    parts = [float(x) for x in str(text).split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated numbers, got {text!r}")
    return tuple(parts)


def strategy_from_text(text, policy):
    """Like :func:`parse_strategy`, plus ``fixed@<phi>,<theta>`` with angles."""
    text = text.strip()
    if text.startswith("fixed@"):
        phi, theta = (parse_angle(x) for x in text[6:].split(","))
        ax = axis_from_angles(phi, theta)
        return StrategyConfig("fixed", tuple(float(x) for x in ax / np.linalg.norm(ax)), policy)
    return parse_strategy(text, policy)


# --- argument handling -----------------------------------------------------

def _add_state_args(p):
    g = p.add_argument_group("initial state")
    g.add_argument("--preset", help="bell | dephased | jacobs_counterexample | product | maximally_mixed")
    g.add_argument("--file", help="state JSON file {\"r\": [[...], ...]}")
    g.add_argument("--beta", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--r-a", dest="r_a", help="Alice Bloch vector x,y,z (product preset)")
    g.add_argument("--r-b", dest="r_b", help="Bob Bloch vector x,y,z (product preset)")


def _add_common(p):
    p.add_argument("--config", help="INI file with default settings")
    p.add_argument("--k", type=float, help="measurement strength (default 0.1)")
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.add_argument("--format", choices=("csv", "json", "svg"))


def _add_sim(p):
    p.add_argument("--dt", type=float)
    p.add_argument("--t-final", dest="t_final", type=float)
    p.add_argument("--n-traj", dest="n_traj", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--increments", choices=("two_point", "gaussian"))
    p.add_argument("--allow-large-step", dest="allow_large_step", action="store_const", const=True)
    p.add_argument("--stats-stride", dest="stats_stride", type=int)
    p.add_argument("--workers", help="worker threads (int or 'auto'); BIPARITY_WORKERS overrides")
    p.add_argument("--degeneracy-policy", dest="degeneracy_policy", choices=("error", "fallback_canonical", "fallback_nested"))


def _add_grid(p):
    p.add_argument("--zenith-count", dest="zenith_count", type=int)
    p.add_argument("--azimuth-count", dest="azimuth_count", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="biparity", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("state", help="inspect a state: coefficients, purities, correlations")
    _add_state_args(p)
    _add_common(p)
    p.add_argument("--save", help="write the state JSON here")

    p = sub.add_parser("scan", help="purification-rate map over all axes")
    _add_state_args(p)
    _add_common(p)
    _add_grid(p)
    p.add_argument("--grid-points", dest="grid_points", type=int, help="Fibonacci grid size for argmax")
    p.add_argument("--svg", help="also write an SVG heatmap of rate_b")

    p = sub.add_parser("simulate", help="ensemble of conditioned trajectories")
    _add_state_args(p)
    _add_common(p)
    _add_sim(p)
    p.add_argument("--strategy", help="fixed:x,y,z | fixed@phi,theta | along_bloch | jacobs | bob_opt | bob_det | simultaneous")

    p = sub.add_parser("compare", help="several strategies on identical noise")
    _add_state_args(p)
    _add_common(p)
    _add_sim(p)
    p.add_argument("--strategies", help="semicolon-separated strategy list (commas inside fixed axes)")
    p.add_argument("--target", type=float, help="target Bob purity for time-to-target (default 0.9)")

    p = sub.add_parser("project", help="projective vs weak measurement over all axes")
    _add_state_args(p)
    _add_common(p)
    _add_grid(p)
    return parser


def _read_config(path):
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_IO) from None
    if not text.lstrip().startswith("["):
        text = "[biparity]\n" + text
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise CliError(f"bad config file {path}: {exc}", EXIT_INVALID) from None
    values = {}
    for section in cp.sections():
        for key, val in cp.items(section):
            values[key.replace("-", "_")] = val
    unknown = set(values) - set(DEFAULTS)
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}", EXIT_INVALID)
    return values


def _coerce(key, val):
    if val is None or not isinstance(val, str):
        return val
    if key in INT_KEYS:
        return int(float(val))
    if key in FLOAT_KEYS:
        return float(val)
    if key in BOOL_KEYS:
        return val.strip().lower() in ("1", "true", "yes", "on")
    return val


def effective_settings(args):
    """Merge defaults < config file < command line."""
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        for key, val in _read_config(args.config).items():
            settings[key] = _coerce(key, val)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    env = os.environ.get("BIPARITY_WORKERS")
    if env:
        settings["workers"] = env
    return settings


def load_state(s):
    if s.get("file"):
        try:
            with open(s["file"]) as fh:
                obj = json.load(fh)
        except OSError as exc:
            raise CliError(f"cannot read state file {s['file']}: {exc}", EXIT_IO) from None
        except json.JSONDecodeError as exc:
            raise CliError(f"state file {s['file']} is not valid JSON: {exc}", EXIT_INVALID) from None
        state = TwoQubitState.from_json(obj)
        problems = validate(state)
        if problems:
            raise StateValidationError("invalid state: " + "; ".join(problems))
        return state, {"file": s["file"]}
    name = s["preset"]
    params = {}
    if name == "bell":
        params["beta"] = 0.0 if s["beta"] is None else s["beta"]
    elif name == "dephased":
        params["beta"] = 0.5 if s["beta"] is None else s["beta"]
        params["delta"] = 0.01 if s["delta"] is None else s["delta"]
    elif name == "product":
        params["r_a"] = parse_vec(s["r_a"]) if s["r_a"] else (0.0, 0.0, 0.0)
        params["r_b"] = parse_vec(s["r_b"]) if s["r_b"] else (0.0, 0.0, 0.0)
    return preset(name, **params), {"preset": name, **{k: (list(v) if isinstance(v, tuple) else v) for k, v in params.items()}}


def _sim_params(s):
    return SimParams(
        k=float(s["k"]),
        dt=float(s["dt"]),
        t_final=float(s["t_final"]),
        seed=int(s["seed"]),
        increments=s["increments"],
        allow_large_step=bool(s["allow_large_step"]),
    )


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None


def _fmt_vec(v):
    return "(" + ", ".join(f"{float(x):.7f}" for x in v) + ")"


# --- commands --------------------------------------------------------------

def cmd_state(s, out):
    state, source = load_state(s)
    r = state.r
    c = correlation_matrix(state)
    sv = svd3(c)
    lines = [f"state: {source}", "coefficients r_ij (rows Alice I,X,Y,Z; columns Bob I,X,Y,Z):"]
    lines.append("        " + "".join(f"{b:>12}" for b in LABELS))
    for i, a in enumerate(LABELS):
        lines.append(f"    {a}   " + "".join(f"{r[i, j]:12.7f}" for j in range(4)))
    lines.append(f"Alice Bloch vector: {_fmt_vec(reduced_bloch(state, 'alice'))}")
    lines.append(f"Bob Bloch vector:   {_fmt_vec(reduced_bloch(state, 'bob'))}")
    lines.append(
        f"purity: Alice {float(purity(state, 'alice')):.7f}  Bob {float(purity(state, 'bob')):.7f}"
        f"  joint {float(purity(state, 'joint')):.7f}"
    )
    lines.append("correlation matrix C (C n = drift of Bob's Bloch vector):")
    for row in c:
        lines.append("    " + "".join(f"{x:12.7f}" for x in row))
    lines.append(f"singular values: {_fmt_vec(sv.sigma)}")
    lines.append(f"first right singular vector v1: {_fmt_vec(sv.v1)}")
    if float(np.sqrt(np.sum(c * c))) <= 1e-12:
        lines.append("note: C = 0 (product state); weak measurement of Alice cannot purify Bob")
    problems = validate(state)
    lines.append("validation: ok" if not problems else "validation: FAILED: " + "; ".join(problems))
    _emit("\n".join(lines) + "\n", out)
    if s.get("save"):
        _emit(json.dumps(state.to_json()) + "\n", s["save"])
    return EXIT_OK


def _argmax_lines(res, label="weak-measurement Bob rate"):
    return [
        f"{label} argmax:",
        f"  grid+refine axis {_fmt_vec(res.axis)}  rate {res.rate:.9g}",
        f"  SVD          axis {_fmt_vec(res.svd_axis)}  rate {res.svd_rate:.9g}",
        f"  discrepancy: axis {res.axis_discrepancy:.3g} rad, rate {res.rate_discrepancy:.3g} (relative)"
        + ("  [degenerate maximum]" if res.degenerate else ""),
    ]


def cmd_scan(s, out):
    state, source = load_state(s)
    k = float(s["k"])
    rmap = rate_map(state, k, int(s["zenith_count"]), int(s["azimuth_count"]))
    res = argmax_axis(state, k, int(s["grid_points"]))
    fmt = s["format"] or "csv"
    if fmt == "csv":
        _emit(rmap.to_csv(), out)
    elif fmt == "svg":
        _emit(render_svg(rmap), out)
    else:
        obj = {
            "schema_version": SCHEMA_VERSION,
            "config": {"state": source, "k": k, "zenith_count": rmap.zenith_count, "azimuth_count": rmap.azimuth_count},
            "argmax": res.to_dict(),
            "map_argmax_b": dict(zip(("phi", "theta", "rate"), rmap.argmax("b"))),
        }
        _emit(json.dumps(obj, indent=2, sort_keys=True) + "\n", out)
    if s.get("svg"):
        _emit(render_svg(rmap), s["svg"])
    phi, theta, rate = rmap.argmax("b")
    report = _argmax_lines(res) + [f"  map cell max: phi {phi:.7f} theta {theta:.7f} rate {rate:.9g}"]
    print("\n".join(report), file=sys.stderr if out is None else sys.stdout)
    return EXIT_OK


def _ensemble(state, strategy, s):
    cfg = EnsembleConfig(
        initial=state,
        strategy=strategy,
        params=_sim_params(s),
        n_traj=int(s["n_traj"]),
        worker_count=s["workers"],
        stats_stride=int(s["stats_stride"]),
    )
    return cfg, run_ensemble(cfg)


def cmd_simulate(s, out):
    state, source = load_state(s)
    strategy = strategy_from_text(s["strategy"], s["degeneracy_policy"])
    cfg, res = _ensemble(state, strategy, s)
    rep = res.determinism()
    fmt = s["format"] or "csv"
    if fmt == "json":
        config = {**cfg.to_dict(), "source": source, "strategy_name": strategy.name}
        _emit(res.stats.to_json(config=config, metadata={"determinism": rep.to_dict()}) + "\n", out)
    elif fmt == "csv":
        _emit(res.stats.to_csv(), out)
    else:
        raise CliError("simulate writes csv or json", EXIT_INVALID)
    st = res.stats
    summary = [
        f"strategy {strategy.name}, {st.n_traj} trajectories, t = 0..{st.times[-1]:g}",
        f"final mean P_A {st.mean_pa[-1]:.7f} (var {st.var_pa[-1]:.3g}), mean P_B {st.mean_pb[-1]:.7f} (var {st.var_pb[-1]:.3g})",
        f"determinism (tol {rep.tol:.3g}): Alice {'yes' if rep.deterministic_a else 'no'} "
        f"(max spread {np.max(rep.spread_a):.3g}), Bob {'yes' if rep.deterministic_b else 'no'} (max spread {np.max(rep.spread_b):.3g})",
        f"trajectories flagged for positivity: {st.flagged_positivity_count}",
    ]
    print("\n".join(summary), file=sys.stderr if out is None else sys.stdout)
    return EXIT_OK


def _split_strategies(text):
    sep = ";" if ";" in text else None
    if sep is None:
        # commas separate names unless they belong to a fixed axis
        parts, buf = [], []
        for tok in text.split(","):
            if buf and buf[0].startswith(("fixed:", "fixed@")) and len(buf) < (3 if buf[0].startswith("fixed:") else 2):
                buf.append(tok)
                continue
            if buf:
                parts.append(",".join(buf))
            buf = [tok]
        if buf:
            parts.append(",".join(buf))
        return [p.strip() for p in parts if p.strip()]
    return [p.strip() for p in text.split(sep) if p.strip()]


def cmd_compare(s, out):
    state, source = load_state(s)
    names = _split_strategies(s["strategies"])
    if len(names) < 2:
        raise CliError("compare needs at least two strategies", EXIT_INVALID)
    strategies = [strategy_from_text(n, s["degeneracy_policy"]) for n in names]
    target = float(s["target"])
    rows = []
    per_strategy = {}
    for strat in strategies:
        cfg, res = _ensemble(state, strat, s)
        slope, sem = initial_slope(res)
        ttt = time_to_target(res.purities_b, res.times, target)
        med = float(np.median(ttt))
        rows.append((strat.name, slope, sem, med, float(res.stats.mean_pb[-1])))
        per_strategy[strat.name] = {
            "config": cfg.to_dict(),
            "stats": json.loads(res.stats.to_json())["stats"],
            "initial_slope_pb": slope,
            "initial_slope_pb_sem": sem,
            "median_time_to_target": med if math.isfinite(med) else "not reached",
        }
    lines = [f"target P_B >= {target:g}; shared seed {int(s['seed'])}", f"{'strategy':<28}{'slope P_B':>12}{'± sem':>12}{'median t*':>14}{'final P_B':>12}"]
    for name, slope, sem, med, fin in rows:
        med_s = f"{med:.4f}" if math.isfinite(med) else "not reached"
        lines.append(f"{name:<28}{slope:12.6f}{sem:12.6f}{med_s:>14}{fin:12.6f}")
    table = "\n".join(lines) + "\n"
    fmt = s["format"] or "json"
    if fmt == "json":
        obj = {"schema_version": SCHEMA_VERSION, "config": {"state": source, "target": target}, "strategies": per_strategy}
        _emit(json.dumps(obj, indent=2, sort_keys=True) + "\n", out)
        print(table, end="", file=sys.stderr if out is None else sys.stdout)
    else:
        _emit(table, out)
    return EXIT_OK


def project_table(state, k, zenith_count, azimuth_count):
    """Expected post-measurement Bob purity and weak-measurement rate on an angle grid."""
    rmap = rate_map(state, k, zenith_count, azimuth_count)
    axes = axis_from_angles(rmap.zeniths[:, None], rmap.azimuths[None, :])
    return rmap, expected_bob_purity(state, axes)


def cmd_project(s, out):
    state, source = load_state(s)
    k = float(s["k"])
    rmap, expected = project_table(state, k, int(s["zenith_count"]), int(s["azimuth_count"]))
    lines = ["phi_rad,theta_rad,expected_bob_purity,rate_b"]
    for i, phi in enumerate(rmap.zeniths):
        for j, theta in enumerate(rmap.azimuths):
            lines.append(f"{float(phi)!r},{float(theta)!r},{float(expected[i, j])!r},{float(rmap.rate_b[i, j])!r}")
    _emit("\n".join(lines) + "\n", out)
    pi, pj = np.unravel_index(np.argmax(expected), expected.shape)
    wphi, wtheta, wrate = rmap.argmax("b")
    report = [
        f"projective argmax: phi {rmap.zeniths[pi]:.7f} theta {rmap.azimuths[pj]:.7f} expected Bob purity {expected[pi, pj]:.12f}",
        f"weak-rate argmax:  phi {wphi:.7f} theta {wtheta:.7f} rate {wrate:.9g}",
    ]
    print("\n".join(report), file=sys.stderr if out is None else sys.stdout)
    return EXIT_OK


COMMANDS = {
    "state": cmd_state,
    "scan": cmd_scan,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "project": cmd_project,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        s = effective_settings(args)
        return COMMANDS[args.command](s, s.get("out"))
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except NumericalGuardError as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (StateValidationError, DegenerateStateError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

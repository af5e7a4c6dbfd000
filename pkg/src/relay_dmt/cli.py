"""Command-line front end: ``relay-dmt analyze|simulate|validate|maxdiv|bundle``.

Exit codes: 0 ok, 1 validation failure, 2 usage, 3 bad input, 4 diversity fit
impossible (all or nearly all points censored).
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
from collections import Counter
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path as FsPath

import numpy as np

from . import __version__
from . import dmt
from .outage import (
    ExperimentConfig,
    InsufficientData,
    TrialPolicy,
    estimate_diversity,
    records_to_csv,
    run_sweep,
)
from .rng import SEED_ENV, resolve_seed
from .scheduling import (
    ScheduleError,
    build_two_hop_schedule,
    default_topology_for,
    interference_pattern,
    is_non_interfering,
    parse_schedule,
    serialize_schedule,
    validate_schedule,
)
from .topology import (
    TopologyError,
    max_flow_path_decomposition,
    min_cut,
    parse_topology,
    serialize_topology,
    two_hop_topology,
)

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_INPUT, EXIT_CENSORED = 0, 1, 2, 3, 4

MODE_ALIASES = {
    "p2p": "p2p",
    "mac": "mac_rs",
    "mac_rs": "mac_rs",
    "af": "mac_af_single_relay",
    "mac_af_single_relay": "mac_af_single_relay",
    "ddf": "mac_ddf_single_relay",
    "mac_ddf_single_relay": "mac_ddf_single_relay",
}
CURVES = ("two_hop", "af_mac", "ddf_mac", "mac_lower", "mac_optimal", "miso",
          "exact_ni", "bounds", "general_lower")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


# -- helpers -------------------------------------------------------------------

def parse_snr(text: str) -> tuple:
    """``a:b:step`` (inclusive) or a comma-separated list of dB values."""
    try:
        if ":" in text:
            a, b, step = (float(x) for x in text.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            n = int(math.floor((b - a) / step + 1e-9))
            return tuple(round(a + k * step, 10) for k in range(n + 1))
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad SNR grid {text!r}; use a:b:step") from None


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _b_value(text):
    if text.lower() in ("inf", "infinity"):
        return math.inf
    return _positive_int(text)


def _read(path) -> str:
    try:
        return FsPath(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def load_topology(path):
    try:
        return parse_topology(_read(path))
    except TopologyError as exc:
        raise InputError(f"{path}: {exc}") from None


def load_schedule(path, g=None):
    try:
        return parse_schedule(_read(path), g)
    except (ScheduleError, TopologyError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _write(out_dir: FsPath, name: str, text: str, written: list):
    out_dir.mkdir(parents=True, exist_ok=True)
    p = out_dir / name
    p.write_text(text, encoding="utf-8")
    written.append(str(p))
    return p


def _manifest(out_dir, command, argv, config, seed, start, written):
    data = {
        "command": command,
        "argv": list(argv),
        "config": config,
        "seed": seed,
        "start": start,
        "end": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
        "python": platform.python_version(),
        "outputs": list(written),
    }
    _write(out_dir, f"{command}.manifest.json", json.dumps(data, indent=2, default=str) + "\n", [])


# -- config file ---------------------------------------------------------------

def parse_config_file(path) -> dict:
    """``key = value`` lines; paths are resolved against the file's directory."""
    base = FsPath(path).resolve().parent
    out = {}
    for line_no, raw in enumerate(_read(path).splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}: line {line_no}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        if k in ("topology", "schedule"):
            v = str((base / v).resolve())
        out[k] = v
    return out


def _floats(text):
    return tuple(float(x) for x in str(text).replace(",", " ").split())


def build_experiment(args, seed) -> ExperimentConfig:
    cfg = parse_config_file(args.config) if args.config else {}
    get = lambda key, flag: flag if flag is not None else cfg.get(key)  # noqa: E731

    mode_name = get("mode", args.mode) or "p2p"
    if mode_name not in MODE_ALIASES:
        raise UsageError(f"unknown mode {mode_name!r}")
    mode = MODE_ALIASES[mode_name]
    M = int(get("M", args.M) or 1)
    K = get("K", args.K)
    B = get("B", args.B) or 1

    rates = fixed = None
    if args.sym_r is not None:
        rates = (args.sym_r,) * M
    elif args.r is not None:
        rates = tuple(args.r)
    elif args.R is not None:
        fixed = tuple(args.R)
    elif "r" in cfg:
        rates = _floats(cfg["r"])
    elif "R" in cfg:
        fixed = _floats(cfg["R"])
    else:
        raise UsageError("give a multiplexing gain (--r/--sym-r) or a fixed rate (--R)")
    if rates is not None and len(rates) == 1 and M > 1:
        rates = rates * M
    if fixed is not None and len(fixed) == 1 and M > 1:
        fixed = fixed * M

    snr = args.snr if args.snr is not None else parse_snr(cfg.get("snr", "20:40:5"))
    policy = TrialPolicy(
        min_trials=int(get("min_trials", args.trials_min) or 1000),
        max_trials=int(get("max_trials", args.trials_max) or 10_000_000),
        target_events=int(get("events", args.events) or 200),
    )

    g = sch = None
    if mode in ("p2p", "mac_rs"):
        topo_path = get("topology", args.topology)
        sched_path = get("schedule", args.schedule)
        if topo_path:
            g = load_topology(topo_path)
        elif K is not None:
            g = two_hop_topology(int(K), sources=M)
        if sched_path:
            sch = load_schedule(sched_path, g)
        elif K is not None:
            sch = build_two_hop_schedule(int(K), int(B), M=M)
        elif "builder" in cfg:
            try:
                sch = parse_schedule(f"builder: {cfg['builder']}", g)
            except (ScheduleError, TopologyError) as exc:
                raise InputError(str(exc)) from None
        if sch is None:
            raise UsageError(f"mode {mode} needs --schedule or --K")
        if g is None:
            g = default_topology_for(sch)
        if mode == "p2p" and len(g.sources) > 1:
            mode = "mac_rs"
        rep = validate_schedule(g, sch)
        if not rep.ok:
            raise InputError("schedule is not valid on the topology:\n" + str(rep))
    crn = str(cfg.get("crn", "true")).lower() not in ("0", "false", "no")
    clip = str(cfg.get("clip", "true")).lower() not in ("0", "false", "no")
    try:
        return ExperimentConfig(mode=mode, topology=g, schedule=sch, rates=rates, fixed_rates=fixed,
                                snr_grid_db=tuple(snr), policy=policy, seed=seed, crn=crn, clip=clip)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def describe_config(cfg: ExperimentConfig) -> dict:
    d = {
        "mode": cfg.mode,
        "rates": cfg.rates,
        "fixed_rates": cfg.fixed_rates,
        "snr_grid_db": list(cfg.snr_grid_db),
        "policy": asdict(cfg.policy),
        "crn": cfg.crn,
        "clip": cfg.clip,
    }
    if cfg.topology is not None:
        d["topology"] = serialize_topology(cfg.topology)
        d["schedule"] = serialize_schedule(cfg.schedule)
    return d


# -- commands ------------------------------------------------------------------

def _curve_rs(args, stop=1.05):
    if args.r_value is not None:
        return np.array([args.r_value])
    return dmt.r_grid(args.r_step, stop)


def cmd_analyze(args, argv):
    start = datetime.now(timezone.utc).isoformat()
    name = args.curve
    curves = []
    if name == "two_hop":
        if args.K is None:
            raise UsageError("--curve two_hop needs --K")
        B = args.B or 1
        rs = _curve_rs(args)
        curves.append(dmt.DmtCurve.sample(f"two_hop K={args.K} B={B}",
                                          lambda r: dmt.dmt_two_hop(args.K, B, r), rs))
    elif name in ("af_mac", "ddf_mac", "mac_lower", "mac_optimal"):
        M = args.M or 1
        rs = np.array([args.sym_r]) if args.sym_r is not None else _curve_rs(args, 1.0 / M + 0.05)
        if name == "af_mac":
            fn = lambda r: dmt.dmt_af_mac((r,) * M)  # noqa: E731
        elif name == "ddf_mac":
            fn = lambda r: dmt.dmt_ddf_mac((r,) * M)  # noqa: E731
        else:
            if args.K is None:
                raise UsageError(f"--curve {name} needs --K")
            if name == "mac_lower":
                B = args.B or 1
                fn = lambda r: dmt.dmt_mac_lower(args.K, B, (r,) * M)  # noqa: E731
            else:
                fn = lambda r: dmt.dmt_mac_optimal(args.K, (r,) * M)  # noqa: E731
        curves.append(dmt.DmtCurve.sample(f"{name} M={M}", fn, rs))
    elif name == "miso":
        if args.K is None:
            raise UsageError("--curve miso needs --K")
        curves.append(dmt.DmtCurve.sample(f"miso K={args.K}", lambda r: dmt.miso_upper(args.K, r),
                                          _curve_rs(args)))
    elif name in ("exact_ni", "general_lower"):
        if not args.schedule:
            raise UsageError(f"--curve {name} needs --schedule")
        g = load_topology(args.topology) if args.topology else None
        sch = load_schedule(args.schedule, g)
        g = g or default_topology_for(sch)
        rep = validate_schedule(g, sch)
        if not rep.ok:
            raise InputError("schedule is not valid on the topology:\n" + str(rep))
        rs = _curve_rs(args)
        if name == "general_lower":
            curves.append(dmt.DmtCurve.sample("general_lower", lambda r: dmt.dmt_rs_general_lower(sch, r), rs))
        else:
            if not is_non_interfering(g, sch):
                raise InputError("exact_ni needs a non-interfering schedule")
            try:
                ds = dmt.dmt_rs_ni_exact_curve(g, sch.paths, sch.slot_count, rs)
            except ValueError as exc:
                raise InputError(str(exc)) from None
            curves.append(dmt.DmtCurve("exact_ni", list(zip(map(float, rs), ds))))
    elif name == "bounds":
        if not args.topology:
            raise UsageError("--curve bounds needs --topology")
        g = load_topology(args.topology)
        rs = _curve_rs(args)
        curves.append(dmt.DmtCurve.sample("upper", lambda r: dmt.dmt_rs_ni_upper(g, r), rs))
        curves.append(dmt.DmtCurve.sample("lower", lambda r: dmt.dmt_rs_ni_lower(g, r), rs))
    else:
        raise UsageError(f"unknown curve {name!r}; choose from {', '.join(CURVES)}")

    text = dmt.curves_to_csv(curves)
    sys.stdout.write(text)
    out = FsPath(args.out)
    written = []
    _write(out, f"dmt_{name}.csv", text, written)
    if not args.no_plot and len(curves[0].points) > 1:
        from .plotting import plot_curves
        out.mkdir(parents=True, exist_ok=True)
        written.append(str(plot_curves(curves, out / f"dmt_{name}.png", title=name)))
    _manifest(out, "analyze", argv, {"curve": name, "K": args.K, "B": args.B, "M": args.M,
                                     "sym_r": args.sym_r, "r": args.r_value, "r_step": args.r_step,
                                     "topology": args.topology, "schedule": args.schedule},
              None, start, written)
    return EXIT_OK


def cmd_bundle(args, argv):
    start = datetime.now(timezone.utc).isoformat()
    figs = dmt.figure_bundle(args.r_step)
    out = FsPath(args.out)
    written = []
    for name, curves in figs.items():
        _write(out, f"{name}.csv", dmt.curves_to_csv(curves), written)
    _write(out, "figures.gp", dmt.gnuplot_script(figs), written)
    if not args.no_plot:
        from .plotting import plot_curves
        for name, curves in figs.items():
            xlabel = "per-user multiplexing gain r" if name == "dm_mac" else "multiplexing gain r"
            written.append(str(plot_curves(curves, out / f"{name}.png", title=name, xlabel=xlabel)))
    for p in written:
        print(p)
    _manifest(out, "bundle", argv, {"r_step": args.r_step}, None, start, written)
    return EXIT_OK


def cmd_simulate(args, argv):
    start = datetime.now(timezone.utc).isoformat()
    seed = resolve_seed(args.seed)
    cfg = build_experiment(args, seed)
    records = run_sweep(cfg, workers=args.workers)
    fit = None
    status = EXIT_OK
    note = None
    if args.fit:
        try:
            fit = estimate_diversity(records, min_events=cfg.policy.target_events)
        except InsufficientData as exc:
            note = f"fit unavailable: {exc}"
            status = EXIT_CENSORED
    text = records_to_csv(records, fit, note)
    sys.stdout.write(text)
    out = FsPath(args.out)
    written = []
    _write(out, f"{args.name}.csv", text, written)
    if not args.no_plot:
        from .plotting import plot_outage
        out.mkdir(parents=True, exist_ok=True)
        written.append(str(plot_outage(records, out / f"{args.name}.png", fit, title=cfg.mode)))
    _manifest(out, "simulate", argv, describe_config(cfg), seed, start, written)
    if status == EXIT_CENSORED:
        print(f"error: {note}", file=sys.stderr)
    return status


def cmd_validate(args, argv):
    start = datetime.now(timezone.utc).isoformat()
    g = load_topology(args.topology) if args.topology else None
    sch = load_schedule(args.schedule, g)
    g = g or default_topology_for(sch)
    rep = validate_schedule(g, sch)
    lines = [str(rep)]
    status = EXIT_OK if rep.ok else EXIT_INVALID
    if args.require_non_interfering and rep.ok:
        pattern = interference_pattern(g, sch)
        bad = {k: v for k, v in pattern.items() if v}
        if bad:
            status = EXIT_INVALID
            lines.append("not non-interfering:")
            for (i, j), others in sorted(bad.items()):
                slot = sch.timing[i - 1][j - 1]
                who = ", ".join(f"path {a} hop {b}" for a, b in sorted(others))
                lines.append(f"  slot {slot}: path {i} hop {j} hears {who}")
        else:
            lines.append("non-interfering")
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    out = FsPath(args.out)
    written = []
    _write(out, "validate.txt", report, written)
    _manifest(out, "validate", argv, {"topology": args.topology, "schedule": args.schedule,
                                      "require_non_interfering": args.require_non_interfering},
              None, start, written)
    return status


def cmd_maxdiv(args, argv):
    start = datetime.now(timezone.utc).isoformat()
    g = load_topology(args.topology)
    d, witness = min_cut(g)
    lines = [f"d_G = {d}", "cut: {" + ",".join(map(str, sorted(witness))) + "}"]
    if d > 0:
        paths = max_flow_path_decomposition(g)
        lines.append(f"paths ({len(paths)}):")
        lines.extend(f"  {p}" for p in paths)
        use = Counter(e for p in paths for e in p.hop_edges())
        lines.append("edge use / weight:")
        lines.extend(f"  {a}-{b}: {use[a, b]}/{g.weight(a, b)}" for a, b in sorted(g.edges) if use[a, b])
    else:
        lines.append("sink unreachable from the sources")
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    out = FsPath(args.out)
    written = []
    _write(out, "maxdiv.txt", report, written)
    _manifest(out, "maxdiv", argv, {"topology": args.topology}, None, start, written)
    return EXIT_OK


# -- parser --------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="relay-dmt", description="Diversity-multiplexing analysis of relay networks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        sp.add_argument("--no-plot", action="store_true", help="skip PNG figures")

    a = sub.add_parser("analyze", help="closed-form and exact DMT curves")
    a.add_argument("--curve", required=True, help=f"one of {', '.join(CURVES)}")
    a.add_argument("--K", type=_positive_int)
    a.add_argument("--B", type=_b_value)
    a.add_argument("--M", type=_positive_int)
    a.add_argument("--sym-r", type=float, help="evaluate at equal per-user rate r")
    a.add_argument("--r", dest="r_value", type=float, help="evaluate at a single r")
    a.add_argument("--r-step", type=float, default=0.01)
    a.add_argument("--topology")
    a.add_argument("--schedule")
    common(a)

    b = sub.add_parser("bundle", help="standard curve families, CSV + gnuplot script")
    b.add_argument("--r-step", type=float, default=0.01)
    common(b)

    s = sub.add_parser("simulate", help="Monte Carlo outage sweep")
    s.add_argument("--config")
    s.add_argument("--mode", choices=sorted(MODE_ALIASES))
    s.add_argument("--topology")
    s.add_argument("--schedule")
    s.add_argument("--K", type=_positive_int)
    s.add_argument("--B", type=_positive_int)
    s.add_argument("--M", type=_positive_int)
    s.add_argument("--r", type=float, nargs="+", help="multiplexing gain per user")
    s.add_argument("--sym-r", type=float, help="same multiplexing gain for all users")
    s.add_argument("--R", type=float, nargs="+", help="fixed rate in bits/symbol per user")
    s.add_argument("--snr", type=parse_snr, help="SNR grid a:b:step in dB")
    s.add_argument("--trials-min", type=_positive_int)
    s.add_argument("--trials-max", type=_positive_int)
    s.add_argument("--events", type=_positive_int, help="target outage events per point")
    s.add_argument("--seed", type=lambda t: int(t, 0), help=f"seed (fallback ${SEED_ENV})")
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--fit", action="store_true", help="append a diversity fit")
    s.add_argument("--name", default="outage", help="output file stem")
    common(s)

    v = sub.add_parser("validate", help="check schedule timing properties")
    v.add_argument("--topology")
    v.add_argument("--schedule", required=True)
    v.add_argument("--require-non-interfering", action="store_true")
    v.add_argument("--out", default=".")

    m = sub.add_parser("maxdiv", help="maximum diversity, witness cut and flow paths")
    m.add_argument("--topology", required=True)
    m.add_argument("--out", default=".")
    return p


COMMANDS = {
    "analyze": cmd_analyze,
    "bundle": cmd_bundle,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "maxdiv": cmd_maxdiv,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"relay-dmt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"relay-dmt: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"relay-dmt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: sweeps, schedule demo, scheme evaluation, self-test.

Exit codes: 0 success, 2 configuration/usage error, 3 refusal because the
user count exceeds the exhaustive-search cap, 4 self-test failure.
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import yaml

from . import selftest
from .channel import LinkInfeasibleError
from .config import ConfigError, ExperimentConfig, config_from_dict, parse_config
from .montecarlo import (build_realization, build_scenario, db_to_linear,
                         plot_sweep, sweep, write_sweep_csv)
from .scheduler import (CapExceededError, combine_multi_flow, format_schedule,
                        optimize_single_flow, write_schedule_csv)
from .schemes import (AIMED_LINKS, SCHEME_FUNCS, RelayMode, SchemeInput, noncdr_rates)

EXIT_OK, EXIT_CONFIG, EXIT_CAP, EXIT_SELFTEST = 0, 2, 3, 4

SCHEME_NAMES = ["noncdr-af", "noncdr-df"] + [
    f"cdr-{sid}-{mode.value.lower()}" for sid in ("main", "s2", "s3", "s4") for mode in RelayMode]

GAIN_NAMES = ("h1", "h2", "h3", "h4", "h5", "h1p", "h2p", "h3p", "h4p", "h5p")


# ---------------------------------------------------------------------------
# Run manifest
# ---------------------------------------------------------------------------

@dataclass
class RunManifest:
    """Everything needed to rerun a command; written next to its outputs."""

    command: str
    version: str
    master_seed: int
    timestamp: str
    outputs: list
    config: dict

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def package_version() -> str:
    """``git describe`` of the source tree, else the installed version."""
    here = Path(__file__).resolve().parent
    try:
        res = subprocess.run(["git", "describe", "--tags", "--always", "--dirty"],
                             cwd=here, capture_output=True, text=True, timeout=5)
        if res.returncode == 0 and res.stdout.strip():
            return res.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        from importlib.metadata import version

        return "v" + version("artifact")
    except Exception:
        return "unknown"


def manifest_path(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.json")


def write_manifest(command: str, cfg: ExperimentConfig, outputs, path: Path) -> None:
    RunManifest(
        command=command,
        version=package_version(),
        master_seed=cfg.master_seed,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        outputs=[str(p) for p in outputs],
        config=cfg.to_dict(),
    ).write(path)


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = yaml.safe_load(value)
    return out


def load_config(args) -> ExperimentConfig:
    """Config file (or defaults) with command-line overrides applied."""
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    data = cfg.to_dict()
    data.update(_parse_set(getattr(args, "set", None)))
    flag_keys = {"trials": "trials", "seed": "master_seed", "n_users": "n_users",
                 "gamma_o_db": "gamma_o_db", "go_straight_prob": "go_straight_prob",
                 "relay_modes": "relay_modes", "scheduler_mode": "scheduler_mode"}
    for attr, key in flag_keys.items():
        value = getattr(args, attr, None)
        if value is not None:
            data[key] = value
    if getattr(args, "no_cap", False):
        data["allow_large_n"] = True
    return config_from_dict(data)


def _add_config_flags(p: argparse.ArgumentParser, sweep_flags: bool) -> None:
    p.add_argument("--config", help="YAML config file or a run manifest to replay")
    if sweep_flags:
        p.add_argument("--seed", type=int, help="master seed (overrides master_seed)")
    p.add_argument("--n-users", type=int, help="number of scheduled users")
    p.add_argument("--gamma-o-db", type=float, help="fixed P/sigma^2 in dB")
    p.add_argument("--go-straight-prob", type=float, help="fixed go-straight probability")
    p.add_argument("--no-cap", action="store_true",
                   help="allow more users than the exhaustive-search cap")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key (value parsed as YAML); repeatable")
    if sweep_flags:
        p.add_argument("--trials", type=int, help="trials per sweep point")
        p.add_argument("--relay-modes", nargs="+", choices=["AF", "DF"])
        p.add_argument("--scheduler-mode", choices=["single_flow", "multi_flow", "both"])


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_sweep(args, axis: str) -> int:
    cfg = load_config(args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = sweep(cfg, axis, workers=args.workers)
    with open(out, "w", newline="") as fh:
        write_sweep_csv(rows, fh)
    outputs = [out]
    if args.plot:
        plot_sweep(rows, args.plot)
        outputs.append(Path(args.plot))
    mpath = manifest_path(out)
    write_manifest(args.command, cfg, outputs, mpath)
    print(f"wrote {out} ({len(rows)} rows) and {mpath}")
    return EXIT_OK


def _side_by_side(left: list[str], right: list[str], gap: int = 4) -> list[str]:
    width = max(len(s) for s in left)
    n = max(len(left), len(right))
    left = left + [""] * (n - len(left))
    right = right + [""] * (n - len(right))
    return [f"{a:<{width}}{' ' * gap}{b}".rstrip() for a, b in zip(left, right)]


def _cmd_schedule_demo(args) -> int:
    cfg = load_config(args)
    mode = RelayMode(args.relay_mode)
    sc = build_scenario(args.scenario_seed, cfg, cfg.go_straight_prob)
    sc = sc.with_gamma_o(db_to_linear(cfg.gamma_o_db))
    single = optimize_single_flow(sc, mode, cap=cfg.user_cap, allow_large=cfg.allow_large_n)
    multi = combine_multi_flow(single, sc, mode)

    dirs = " ".join(f"U{i}:{d.value}" for i, d in enumerate(sc.directions, start=1))
    print(f"seed={args.scenario_seed} n={cfg.n_users} gamma_o={cfg.gamma_o_db:g} dB "
          f"p_o={cfg.go_straight_prob:g} relay={mode.value}")
    print(f"directions: {dirs}")
    print()
    for line in _side_by_side(format_schedule(single, "single-flow"),
                              format_schedule(multi, "multi-flow")):
        print(line)
    for name, s in (("single_flow", single), ("multi_flow", multi)):
        print()
        print(f"# {name}")
        write_schedule_csv(s, sys.stdout)

    if args.out_dir:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        traj, _, chan = build_realization(args.scenario_seed, cfg, cfg.go_straight_prob)
        files = {"trajectory.csv": traj.to_csv, "channel.csv": chan.to_csv,
                 "schedule_single.csv": lambda fh: write_schedule_csv(single, fh),
                 "schedule_multi.csv": lambda fh: write_schedule_csv(multi, fh)}
        for fname, writer in files.items():
            with open(d / fname, "w", newline="") as fh:
                writer(fh)
        write_manifest("schedule-demo", cfg, [d / f for f in files], d / "manifest.json")
    return EXIT_OK


def _parse_complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ConfigError(f"not a complex number: {text!r}") from None


def scheme_input_from_args(args, sid: str | None) -> SchemeInput:
    """Unit aimed gains and zero cross gains, then the explicit overrides."""
    gains = {name: 0j for name in GAIN_NAMES}
    aimed = AIMED_LINKS[sid] if sid else ()
    for name in aimed:
        gains[name] = 1 + 0j
    if sid == "s4":
        gains["h3p"] = 1 + 0j  # direct user's slot-2 repeat link
    for item in args.gain or ():
        name, sep, value = item.partition("=")
        if not sep or name not in GAIN_NAMES:
            raise ConfigError(f"--gain expects NAME=COMPLEX with NAME in {GAIN_NAMES}, "
                              f"got {item!r}")
        gains[name] = _parse_complex(value)
    for flag, num, den in (("g4_over_g3", "h4p", "h3p"), ("g1_over_g2", "h1p", "h2p")):
        ratio = getattr(args, flag)
        if ratio is None:
            continue
        if sid != "main":
            raise ConfigError(f"--{flag.replace('_', '-')} only applies to cdr-main-*")
        if ratio < 0:
            raise ConfigError(f"--{flag.replace('_', '-')} must be non-negative")
        gains[num] = complex(abs(gains[den]) * ratio ** 0.5)
    try:
        return SchemeInput(gamma_o=db_to_linear(args.gamma_o_db), noise_power=args.noise_power,
                           beta=args.beta, **gains)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _fmt(v: float) -> str:
    text = repr(float(v))
    frac = Fraction(v).limit_denominator(1000)
    if frac.denominator > 1 and abs(float(frac) - v) <= 1e-12 * abs(v):
        text += f"  (= {frac})"
    return text


def _cmd_scheme_eval(args) -> int:
    parts = args.scheme.split("-")
    mode = RelayMode(parts[-1].upper())
    sid = None if parts[0] == "noncdr" else parts[1]
    inp = scheme_input_from_args(args, sid)
    if sid is None:
        out = noncdr_rates(mode, inp.gamma_o, noise_power=inp.noise_power)
    else:
        out = SCHEME_FUNCS[(sid, mode)](inp)

    print(f"scheme: {args.scheme}")
    print(f"gamma_o = {_fmt(inp.gamma_o)} ({args.gamma_o_db:g} dB), "
          f"sigma^2 = {inp.noise_power!r}, beta = {inp.beta!r}")
    if sid is not None:
        nonzero = ", ".join(f"{n}={getattr(inp, n)}" for n in GAIN_NAMES if getattr(inp, n) != 0)
        print(f"coefficients: {nonzero}")
    for key, value in out.breakdown.items():
        print(f"{key} = {_fmt(value)}")
    for j, (a, b) in enumerate(out.option_snrs, start=1):
        rate_sum = out.option_sum_rates()[j - 1]
        print(f"option {j}: SNR_1 = {_fmt(a)}, SNR_2 = {_fmt(b)}, sum_rate = {rate_sum!r}")
    print(f"chosen option: {out.option}")
    print(f"rates: R_1 = {out.rates[0]!r}, R_2 = {out.rates[1]!r}, sum = {out.sum_rate!r}")
    print(f"slots_used: {out.slots_used}")
    if out.energy is not None:
        print(f"energy: {out.energy!r}")
    return EXIT_OK


def _cmd_selftest(args) -> int:
    return EXIT_OK if selftest.run(args.seed) else EXIT_SELFTEST


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="v2icdr",
        description="Cooperative direct/relayed V2I scheduling simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, axis, default in (("sweep-snr", "gamma_o_db", "sweep_snr.csv"),
                                ("sweep-po", "go_straight_prob", "sweep_po.csv")):
        p = sub.add_parser(name, help=f"sum rate versus {axis}")
        _add_config_flags(p, sweep_flags=True)
        p.add_argument("--out", default=default, help="output CSV path")
        p.add_argument("--plot", help="also save a plot (PNG/PDF/SVG)")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        p.set_defaults(func=lambda a, axis=axis: _cmd_sweep(a, axis))

    p = sub.add_parser("schedule-demo", help="single- vs multi-flow schedule of one realization")
    _add_config_flags(p, sweep_flags=False)
    p.add_argument("--seed", dest="scenario_seed", type=int, default=0,
                   help="realization seed")
    p.add_argument("--relay-mode", choices=["AF", "DF"], default="AF")
    p.add_argument("--out-dir", help="also write trajectory/channel/schedule CSVs here")
    p.set_defaults(func=_cmd_schedule_demo)

    p = sub.add_parser("scheme-eval", help="SNR breakdown of one scheme from explicit gains")
    p.add_argument("--scheme", required=True, choices=SCHEME_NAMES)
    p.add_argument("--gamma-o-db", type=float, required=True)
    p.add_argument("--g4-over-g3", type=float, help="|h4'|^2 / |h3'|^2 (main scheme)")
    p.add_argument("--g1-over-g2", type=float, help="|h1'|^2 / |h2'|^2 (main scheme)")
    p.add_argument("--gain", action="append", metavar="NAME=COMPLEX",
                   help="set one coefficient, e.g. h5p=0.3+0.2j; repeatable")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--noise-power", type=float, default=1.0)
    p.set_defaults(func=_cmd_scheme_eval)

    p = sub.add_parser("selftest", help="run the invariant oracles")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ConfigError, LinkInfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

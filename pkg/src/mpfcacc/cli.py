"""Command-line front end.

::

    mpfcacc simulate --config F [--out DIR] [--set key=value ...]
    mpfcacc analyze  --config F
    mpfcacc region   --config F --axis1 h:0.1:2:100 --axis2 dc:0:0.5:100 --m 1,2,3
    mpfcacc gains    --p -2 --h 1 --m 3 --tau 0.2
    mpfcacc compare  --config F [--out DIR]

Configuration files are YAML. Errors go to stderr as ``error[CODE]: message``
and the exit status is non-zero.
"""

from __future__ import annotations

import argparse
import copy
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, ParseError, PlatoonError, UnknownKey
from .frequency import (
    Axis,
    ChannelParams,
    corollary1_conditions,
    denominator_coeffs,
    pole_placement_gains,
    region_sweep,
    routh_stable,
    string_stable_norm,
    theorem1_conditions,
)
from .leader import load_leader_profile, pulse_profile
from .model import (
    PlatoonConfig,
    ValidatedConfig,
    VehicleParams,
    VehicleState,
    default_initial_state,
    equilibrium_state,
    validate_platoon,
)
from .scenarios import with_single_predecessor
from .simulation import SimulationResult, compute_metrics, run_scenario

DEFAULTS = {
    "platoon": {"D": 0.7, "Ts": 0.01, "T": 60.0, "leader_mode": "lag"},
    "gains": {"alpha": 5.0, "b": 10.0, "c": 2.0},
    "leader": {"tau": 0.3, "dc": 0.0, "length": 0.0, "profile": None},
    "initial": {"kind": "cutin", "v_follower": 15.0, "v_leader": 14.0, "s_first": 6.0},
    "vehicles": [],
    "region": None,
}

ALLOWED = {
    "platoon": {"D", "Ts", "T", "leader_mode"},
    "gains": {"alpha", "b", "c"},
    "leader": {"tau", "dc", "length", "profile"},
    "profile": {"knots", "csv", "pulse"},
    "pulse": {"v0", "dv", "start", "ramp", "hold"},
    "initial": {"kind", "v_follower", "v_leader", "s_first", "speed"},
    "vehicle": {"tau", "h", "dc", "m", "alpha", "b", "c", "length", "s0", "v0", "a0"},
    "region": {"tau", "alpha", "b", "c", "h", "dc", "D", "m", "axis1", "axis2"},
}

METRIC_FIELDS = [
    "index",
    "overshoot",
    "peak_speed",
    "l2_speed_dev",
    "ss_speed_error",
    "ss_spacing_error",
    "terminal_spacing_error",
    "min_spacing",
    "amplifies",
]


COMMANDS = ("simulate", "analyze", "region", "gains", "compare")


@dataclass(frozen=True)
class RunManifest:
    """What one invocation was asked to do."""

    command: str
    config: Path = None
    out: Path = None
    overrides: tuple = ()

    def check(self) -> "RunManifest":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.config is not None and not Path(self.config).is_file():
            raise ConfigError(f"config file {self.config} does not exist")
        for item in self.overrides:
            if "=" not in item:
                raise ParseError(f"override {item!r} is not key=value")
        return self


@dataclass
class AnalysisSpec:
    template: ChannelParams
    m_values: tuple
    axis1: Axis = None
    axis2: Axis = None


# ---------------------------------------------------------------------------
# configuration


def _load_yaml(path: Path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ParseError(f"{path}: {exc.problem}", line=line) from None
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be a mapping")
    return data


def _check_keys(section: dict, allowed: set, where: str):
    if not isinstance(section, dict):
        raise ParseError(f"{where} must be a mapping", field=where)
    unknown = set(section) - allowed
    if unknown:
        raise UnknownKey(f"unknown key(s) in {where}: {', '.join(sorted(map(str, unknown)))}")


def _apply_override(data: dict, item: str):
    if "=" not in item:
        raise ParseError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    parts = key.strip().split(".")
    node = data
    for depth, part in enumerate(parts[:-1]):
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise UnknownKey(f"override {key!r}: no list entry {part!r}") from None
        else:
            if part not in node or node[part] is None:
                if depth == 0 and part not in DEFAULTS:
                    raise UnknownKey(f"override {key!r}: unknown section {part!r}")
                node[part] = {}
            node = node[part]
    last = parts[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = value
        except (ValueError, IndexError):
            raise UnknownKey(f"override {key!r}: no list entry {last!r}") from None
    elif len(parts) == 1:
        raise UnknownKey(f"override {key!r} must name a section and a key")
    else:
        node[last] = value


def load_config(path, overrides=()) -> dict:
    """Read a YAML config, merge defaults, apply ``key=value`` overrides."""
    data = _load_yaml(path)
    _check_keys(data, set(DEFAULTS), "top level")
    merged = copy.deepcopy(DEFAULTS)
    for key, value in data.items():
        if isinstance(merged.get(key), dict) and isinstance(value, dict):
            merged[key].update(value)
        else:
            merged[key] = value
    for item in overrides:
        _apply_override(merged, item)
    for section in ("platoon", "gains", "leader", "initial"):
        _check_keys(merged[section], ALLOWED[section], section)
    if not isinstance(merged["vehicles"], list):
        raise ParseError("vehicles must be a list", field="vehicles")
    for i, veh in enumerate(merged["vehicles"], start=1):
        _check_keys(veh, ALLOWED["vehicle"], f"vehicles[{i - 1}]")
    if merged["region"] is not None:
        _check_keys(merged["region"], ALLOWED["region"], "region")
    merged["_base_dir"] = str(Path(path).resolve().parent)
    return merged


def _number(value, field, kind=float):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ParseError(f"expected a number, got {value!r}", field=field) from None


def _profile(raw: dict, Ts: float, base_dir: str):
    spec = raw["leader"].get("profile")
    if spec is None:
        return None
    _check_keys(spec, ALLOWED["profile"], "leader.profile")
    if len(spec) != 1:
        raise ParseError("leader.profile needs exactly one of knots, csv, pulse", field="leader.profile")
    if "knots" in spec:
        try:
            knots = [(float(t), float(v)) for t, v in spec["knots"]]
        except (TypeError, ValueError):
            raise ParseError("knots must be a list of [t, v] pairs", field="leader.profile.knots") from None
        return load_leader_profile(knots, Ts)
    if "csv" in spec:
        path = Path(spec["csv"])
        if not path.is_absolute():
            path = Path(base_dir) / path
        return load_leader_profile(str(path), Ts)
    pulse = spec["pulse"] or {}
    _check_keys(pulse, ALLOWED["pulse"], "leader.profile.pulse")
    kwargs = {k: _number(v, f"leader.profile.pulse.{k}") for k, v in pulse.items()}
    return pulse_profile(Ts=Ts, **kwargs)


def build_platoon(raw: dict) -> ValidatedConfig:
    """Turn a merged config dictionary into a validated platoon."""
    plat, gains, lead, init = raw["platoon"], raw["gains"], raw["leader"], raw["initial"]
    Ts = _number(plat["Ts"], "platoon.Ts")
    vehicles = [
        VehicleParams(
            0,
            _number(lead["tau"], "leader.tau"),
            dc=_number(lead["dc"], "leader.dc"),
            length=_number(lead["length"], "leader.length"),
        )
    ]
    for i, veh in enumerate(raw["vehicles"], start=1):
        where = f"vehicles[{i - 1}]"
        for req in ("tau", "h", "m"):
            if req not in veh:
                raise ParseError(f"missing required key {req!r}", field=f"{where}.{req}")
        vehicles.append(
            VehicleParams(
                i,
                _number(veh["tau"], f"{where}.tau"),
                _number(veh["h"], f"{where}.h"),
                _number(veh.get("dc", 0.0), f"{where}.dc"),
                _number(veh["m"], f"{where}.m", int),
                _number(veh.get("alpha", gains["alpha"]), f"{where}.alpha"),
                _number(veh.get("b", gains["b"]), f"{where}.b"),
                _number(veh.get("c", gains["c"]), f"{where}.c"),
                _number(veh.get("length", 0.0), f"{where}.length"),
            )
        )
    profile = _profile(raw, Ts, raw.get("_base_dir", "."))

    kind = init.get("kind", "cutin")
    if kind == "cutin":
        initial = list(
            default_initial_state(
                vehicles,
                _number(init["v_follower"], "initial.v_follower"),
                _number(init["v_leader"], "initial.v_leader"),
                None if init.get("s_first") is None else _number(init["s_first"], "initial.s_first"),
            )
        )
    elif kind == "equilibrium":
        speed = init.get("speed")
        if speed is None:
            speed = profile.speed[0] if profile is not None else init["v_leader"]
        initial = list(equilibrium_state(vehicles, _number(speed, "initial.speed")))
    else:
        raise ParseError(f"unknown initial kind {kind!r}", field="initial.kind")
    for i, veh in enumerate(raw["vehicles"], start=1):
        st = initial[i]
        initial[i] = VehicleState(
            _number(veh.get("s0", st.s), f"vehicles[{i - 1}].s0"),
            _number(veh.get("v0", st.v), f"vehicles[{i - 1}].v0"),
            _number(veh.get("a0", st.a), f"vehicles[{i - 1}].a0"),
        )

    config = PlatoonConfig(
        vehicles=tuple(vehicles),
        actuation_delay=_number(plat["D"], "platoon.D"),
        sample_time=Ts,
        horizon=_number(plat["T"], "platoon.T"),
        leader_profile=profile,
        initial_state=tuple(initial),
        leader_mode=str(plat.get("leader_mode", "lag")),
    )
    return validate_platoon(config)


def build_analysis(raw: dict) -> AnalysisSpec:
    """Channel template for region sweeps; falls back to the platoon defaults."""
    reg = raw.get("region") or {}
    gains, plat = raw["gains"], raw["platoon"]
    m_raw = reg.get("m", [1, 2, 3])
    m_values = tuple(int(x) for x in (m_raw if isinstance(m_raw, list) else [m_raw]))
    template = ChannelParams.homogeneous(
        _number(reg.get("alpha", gains["alpha"]), "region.alpha"),
        _number(reg.get("b", gains["b"]), "region.b"),
        _number(reg.get("c", gains["c"]), "region.c"),
        _number(reg.get("tau", 0.1), "region.tau"),
        _number(reg.get("h", 1.0), "region.h"),
        1,
        _number(reg.get("dc", 0.0), "region.dc"),
        _number(reg.get("D", plat["D"]), "region.D"),
    )
    axis1 = Axis.parse(reg["axis1"]) if "axis1" in reg else None
    axis2 = Axis.parse(reg["axis2"]) if "axis2" in reg else None
    return AnalysisSpec(template, m_values, axis1, axis2)


def parse_config(path, overrides=()):
    """Platoon config (``ValidatedConfig``) or, for analysis-only files, an ``AnalysisSpec``."""
    raw = load_config(path, overrides)
    if raw["vehicles"]:
        return build_platoon(raw)
    return build_analysis(raw)


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    return f"{x:.9g}"


def write_timeseries_csv(result: SimulationResult, directory) -> list:
    """Write speed/spacing/accel/control CSVs plus metrics.csv into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = ["t"] + [f"veh{i}" for i in range(result.n_vehicles)]
    written = []
    for name, data in (("speed", result.v), ("spacing", result.s), ("accel", result.a), ("control", result.u)):
        path = directory / f"{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for t, row in zip(result.t, data):
                w.writerow([_fmt(t)] + [_fmt(x) for x in row])
        written.append(path)
    metrics = result.metrics or compute_metrics(result)
    path = directory / "metrics.csv"
    _write_metrics(path, metrics["vehicles"])
    written.append(path)
    return written


def _write_metrics(path, rows, fields=METRIC_FIELDS):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for row in rows:
            w.writerow([_fmt(row[f]) if isinstance(row[f], float) else str(row[f]).lower() for f in fields])


def read_timeseries_csv(path):
    """Inverse of the per-quantity writer: returns ``(t, data)``."""
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return arr[:, 0], arr[:, 1:]


def write_region_csv(grids: dict, axis1: Axis, axis2: Axis, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "m", "stable"])
        for m, grid in grids.items():
            for r, x in enumerate(axis1.values):
                for k, y in enumerate(axis2.values):
                    w.writerow([_fmt(x), _fmt(y), m, int(grid[r, k])])


# ---------------------------------------------------------------------------
# commands


def _simulate(config: ValidatedConfig, out):
    result = run_scenario(config)
    metrics = compute_metrics(result)
    if out is not None:
        write_timeseries_csv(result, out)
    return result, metrics


def cmd_simulate(args):
    config = parse_config(args.config, args.set)
    if not isinstance(config, ValidatedConfig):
        raise ConfigError("simulate needs a config with a vehicles list")
    _, metrics = _simulate(config, args.out)
    print(f"v_ss = {_fmt(metrics['v_ss'])}")
    print("veh  overshoot  l2_dev  ss_speed_err  ss_spacing_err  amplifies")
    for row in metrics["vehicles"]:
        print(
            f"{row['index']:>3}  {row['overshoot']:9.4g}  {row['l2_speed_dev']:6.4g}  "
            f"{row['ss_speed_error']:12.3g}  {row['ss_spacing_error']:14.3g}  {row['amplifies']}"
        )
    return 0


def cmd_analyze(args):
    config = parse_config(args.config, args.set)
    if not isinstance(config, ValidatedConfig):
        raise ConfigError("analyze needs a config with a vehicles list")
    vehicles, D = config.vehicles, config.D
    print("veh  m  routh  margin      sigma_norm  norm_ok  theorem1  corollary1")
    for i in range(1, len(vehicles)):
        p = ChannelParams.from_platoon(vehicles, i, D)
        ok, margin = routh_stable(p)
        if ok:
            v = string_stable_norm(p)
            sigma, norm_ok = _fmt(v.sigma_norm), str(v.norm_ok)
        else:
            sigma, norm_ok = "inf", "False"
        thm = theorem1_conditions(p).theorem1_ok
        cor = corollary1_conditions(p).theorem1_ok if not any(p.pred_dc) else "-"
        print(f"{i:>3}  {p.m}  {str(ok):5}  {margin:<10.6g}  {sigma:<10}  {norm_ok:7}  {str(thm):8}  {cor}")
    return 0


def cmd_region(args):
    raw = load_config(args.config, args.set) if args.config else copy.deepcopy(DEFAULTS)
    spec = build_analysis(raw)
    axis1 = Axis.parse(args.axis1) if args.axis1 else spec.axis1
    axis2 = Axis.parse(args.axis2) if args.axis2 else spec.axis2
    if axis1 is None or axis2 is None:
        raise ConfigError("region needs --axis1 and --axis2 (or region.axis1/axis2 in the config)")
    m_values = tuple(int(x) for x in args.m.split(",")) if args.m else spec.m_values
    grids = region_sweep(axis1, axis2, spec.template, m_values)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_region_csv(grids, axis1, axis2, out / "grid.csv")
    for m, grid in grids.items():
        print(f"m={m}: {int(grid.sum())}/{grid.size} points string stable")
    return 0


def cmd_gains(args):
    alpha, b, c = pole_placement_gains(args.p, args.h, args.m, args.tau)
    p = ChannelParams.homogeneous(alpha, b, c, args.tau, args.h, args.m)
    coeffs = denominator_coeffs(p)
    print(f"alpha = {_fmt(alpha)}")
    print(f"b     = {_fmt(b)}")
    print(f"c     = {_fmt(c)}")
    print("denominator = " + ", ".join(_fmt(x) for x in coeffs))
    return 0


def cmd_compare(args):
    config = parse_config(args.config, args.set)
    if not isinstance(config, ValidatedConfig):
        raise ConfigError("compare needs a config with a vehicles list")
    out = Path(args.out) if args.out else None
    single = validate_platoon(with_single_predecessor(config.config))
    _, m_mpf = _simulate(config, out / "mpf" if out else None)
    _, m_one = _simulate(single, out / "single" if out else None)
    diff = []
    for a, b in zip(m_mpf["vehicles"], m_one["vehicles"]):
        diff.append(
            {
                "index": a["index"],
                "overshoot_mpf": a["overshoot"],
                "overshoot_single": b["overshoot"],
                "l2_mpf": a["l2_speed_dev"],
                "l2_single": b["l2_speed_dev"],
                "l2_diff": b["l2_speed_dev"] - a["l2_speed_dev"],
            }
        )
    fields = list(diff[0])
    if out:
        _write_metrics(out / "diff_metrics.csv", diff, fields)
    print("veh  overshoot_mpf  overshoot_single  l2_mpf  l2_single")
    for row in diff:
        print(
            f"{row['index']:>3}  {row['overshoot_mpf']:13.4g}  {row['overshoot_single']:16.4g}  "
            f"{row['l2_mpf']:6.4g}  {row['l2_single']:9.4g}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpfcacc", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p, required=True):
        p.add_argument("--config", type=Path, required=required)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        return p

    p = with_config(sub.add_parser("simulate", help="run a platoon scenario"))
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_simulate)

    p = with_config(sub.add_parser("analyze", help="stability verdict per follower"))
    p.set_defaults(func=cmd_analyze)

    p = with_config(sub.add_parser("region", help="string-stability region grid"), required=False)
    p.add_argument("--axis1")
    p.add_argument("--axis2")
    p.add_argument("--m")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("gains", help="pole-placement gains")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.set_defaults(func=cmd_gains)

    p = with_config(sub.add_parser("compare", help="MPF versus single-predecessor run"))
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        RunManifest(
            args.command,
            getattr(args, "config", None),
            getattr(args, "out", None),
            tuple(getattr(args, "set", ())),
        ).check()
        return args.func(args)
    except PlatoonError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[IO]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line driver: plot data, capacity sweeps and Monte Carlo validation.

Scenario files are INI documents::

    [channel]
    kind = ou            # or: uncorrelated
    d = 1, 2, 5          # or a single pair: a = 0.5 / b = 0.5

    [scenario]
    W = 1
    rho = 1e-2:1e3:25    # log range min:max:points, or a comma list
    grid_size = 4096
    mode = both

    [mc]
    n = 100000
    seed = 0
    M = 1024
    T =                  # empty: 20/b
    rho = 0.1, 10        # SNRs of the capacity checks

Command-line flags override file values. CSV output starts with a commented
line echoing the effective configuration.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .capacity import SnrScenario, capacity_no_csi, partial_csi_crossover, waterfill
from .channel import OuVariance, UncorrelatedVariance, crossing_frequency
from .errors import DomainError, NumericalError, UsageError
from .mc_oracle import validate_ou
from .rearrange import midpoints

__all__ = ["McConfig", "ScenarioConfig", "load_config", "dump_config", "parse_rho", "main"]

MODES = ("no-csi", "partial-csi", "both")


@dataclass(frozen=True)
class McConfig:
    n: int = 100_000
    seed: int = 0
    M: int = 1024
    T: float | None = None
    rho: tuple = (0.1, 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str = "ou"
    d: tuple = (1.0, 5.0)
    a: float | None = None
    b: float | None = None
    W: float = 1.0
    rho: tuple = ()
    rho_spec: str = field(default="1e-2:1e3:25", compare=False)
    grid_size: int = 4096
    mode: str = "both"
    mc: McConfig = McConfig()

    def __post_init__(self):
        if not self.rho:
            object.__setattr__(self, "rho", parse_rho(self.rho_spec))
        self.validate()

    def validate(self):
        if self.kind not in ("ou", "uncorrelated"):
            raise UsageError(f"[channel] kind: expected 'ou' or 'uncorrelated', got {self.kind!r}")
        if self.kind == "ou":
            if (self.a is None) != (self.b is None):
                raise UsageError("[channel] a and b must be given together")
            if self.a is not None:
                if self.a < 0 or self.b <= 0:
                    raise UsageError("[channel] need a >= 0 and b > 0")
            elif not self.d or any(not (x > 0 and math.isfinite(x)) for x in self.d):
                raise UsageError("[channel] d: need one or more positive values")
        if not (self.W > 0 and math.isfinite(self.W)):
            raise UsageError("[scenario] W: must be positive")
        if not self.rho or any(not (r >= 0 and math.isfinite(r)) for r in self.rho):
            raise UsageError("[scenario] rho: need a nonempty list of values >= 0")
        if self.grid_size < 2:
            raise UsageError("[scenario] grid_size: must be at least 2")
        if self.mode not in MODES:
            raise UsageError(f"[scenario] mode: expected one of {MODES}, got {self.mode!r}")
        if self.mc.n < 2 or self.mc.M < 1:
            raise UsageError("[mc] n must be >= 2 and M >= 1")
        if self.mc.T is not None and not self.mc.T > 0:
            raise UsageError("[mc] T: must be positive")
        if not self.mc.rho or any(not (r > 0 and math.isfinite(r)) for r in self.mc.rho):
            raise UsageError("[mc] rho: need positive SNR values")

    @property
    def d_values(self):
        if self.kind != "ou":
            return ()
        if self.a is not None:
            return (self.a + self.b,)
        return tuple(self.d)

    def channels(self):
        """``(label, SpectralVariance)`` pairs in configuration order."""
        if self.kind == "uncorrelated":
            return [("uncorrelated", UncorrelatedVariance(self.W))]
        return [(f"d={_fmt(d)}", OuVariance(d, self.W)) for d in self.d_values]


def _fmt(x):
    return f"{x:.12g}"


def parse_rho(spec):
    """``"min:max:points"`` (log-spaced, inclusive) or a comma-separated list."""
    spec = str(spec).strip()
    try:
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise ValueError
            lo, hi, num = float(parts[0]), float(parts[1]), int(parts[2])
            if lo <= 0 or hi < lo or num < 1:
                raise ValueError
            return tuple(float(r) for r in np.logspace(math.log10(lo), math.log10(hi), num))
        values = tuple(float(x) for x in spec.split(",") if x.strip())
        if not values:
            raise ValueError
        return values
    except ValueError:
        raise UsageError(
            f"rho: cannot parse {spec!r}; use 'min:max:points' or a comma list"
        ) from None


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _get(parser, section, key, conv, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    if raw == "":
        return default
    try:
        return conv(raw)
    except ValueError:
        raise UsageError(f"[{section}] {key}: invalid value {raw!r}") from None


def config_from_text(text, source="<config>"):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise UsageError(f"{source}: {exc}") from None
    known = {"channel", "scenario", "mc"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise UsageError(f"{source}: unknown section(s) {sorted(unknown)}")
    base = ScenarioConfig()
    rho_spec = _get(parser, "scenario", "rho", str, base.rho_spec)
    mc = McConfig(
        n=_get(parser, "mc", "n", lambda s: int(float(s)), base.mc.n),
        seed=_get(parser, "mc", "seed", int, base.mc.seed),
        M=_get(parser, "mc", "M", int, base.mc.M),
        T=_get(parser, "mc", "T", float, base.mc.T),
        rho=_get(parser, "mc", "rho", parse_rho, base.mc.rho),
    )
    try:
        return ScenarioConfig(
            kind=_get(parser, "channel", "kind", str, base.kind),
            d=_get(parser, "channel", "d", _floats, base.d),
            a=_get(parser, "channel", "a", float, None),
            b=_get(parser, "channel", "b", float, None),
            W=_get(parser, "scenario", "W", float, base.W),
            rho=parse_rho(rho_spec),
            rho_spec=rho_spec,
            grid_size=_get(parser, "scenario", "grid_size", int, base.grid_size),
            mode=_get(parser, "scenario", "mode", str, base.mode),
            mc=mc,
        )
    except UsageError as exc:
        raise UsageError(f"{source}: {exc}") from None


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    return config_from_text(text, source=str(path))


def dump_config(cfg):
    """INI text that :func:`config_from_text` parses back to an equal config."""
    out = ["[channel]", f"kind = {cfg.kind}"]
    if cfg.a is not None:
        out += [f"a = {cfg.a!r}", f"b = {cfg.b!r}"]
    out.append("d = " + ", ".join(repr(float(x)) for x in cfg.d))
    rho_text = cfg.rho_spec if parse_rho(cfg.rho_spec) == cfg.rho else ", ".join(map(repr, cfg.rho))
    out += ["", "[scenario]", f"W = {cfg.W!r}", f"rho = {rho_text}",
            f"grid_size = {cfg.grid_size}", f"mode = {cfg.mode}",
            "", "[mc]", f"n = {cfg.mc.n}", f"seed = {cfg.mc.seed}", f"M = {cfg.mc.M}",
            f"T = {'' if cfg.mc.T is None else repr(cfg.mc.T)}",
            "rho = " + ", ".join(map(repr, cfg.mc.rho)), ""]
    return "\n".join(out)


def _config_echo(cfg):
    data = asdict(cfg)
    data["rho"] = cfg.rho_spec if parse_rho(cfg.rho_spec) == cfg.rho else list(cfg.rho)
    data.pop("rho_spec")
    return "# config: " + json.dumps(data, sort_keys=True)


def _write_csv(stream, cfg, comments, header, rows):
    stream.write(_config_echo(cfg) + "\n")
    for line in comments:
        stream.write(f"# {line}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])


# --- commands ---------------------------------------------------------------


def cmd_variance(cfg, stream):
    """Rearranged spectra on the midpoint grid, with pairwise crossing frequencies."""
    f = midpoints(cfg.grid_size)
    channels = cfg.channels()
    comments = []
    ds = sorted(cfg.d_values)
    for i, d1 in enumerate(ds):
        for d2 in ds[i + 1:]:
            if d1 < d2:
                comments.append(f"crossing d1={_fmt(d1)} d2={_fmt(d2)} "
                                f"f={_fmt(crossing_frequency(d1, d2, cfg.W))}")
    cols = [np.broadcast_to(sigma.rearranged(f), f.shape) for _, sigma in channels]
    header = ["f"] + [f"sigma_star_{label}" for label, _ in channels]
    rows = ([float(f[i])] + [float(c[i]) for c in cols] for i in range(f.size))
    _write_csv(stream, cfg, comments, header, rows)


def _point(job):
    """One (channel, rho) evaluation; top level so worker processes can run it."""
    kind, d, W, rho, mode = job
    sigma = UncorrelatedVariance(W) if kind == "uncorrelated" else OuVariance(d, W)
    scen = SnrScenario(rho, W)
    out = {}
    if mode in ("no-csi", "both"):
        out["c_no"] = capacity_no_csi(sigma, scen).value
    if mode in ("partial-csi", "both"):
        sol = waterfill(sigma, scen)
        out["c_part"] = sol.capacity
        out["theta"] = sol.theta
    return out


def _evaluate(cfg, workers):
    """Results keyed by ``(channel index, rho index)``, independent of completion order."""
    chans = cfg.channels()
    jobs, keys = [], []
    for ci, (_, sigma) in enumerate(chans):
        d = getattr(sigma, "d", None)
        for ri, rho in enumerate(cfg.rho):
            jobs.append((cfg.kind, d, cfg.W, rho, cfg.mode))
            keys.append((ci, ri))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_point, jobs))
    else:
        results = [_point(job) for job in jobs]
    return chans, dict(zip(keys, results))


def cmd_capacity(cfg, stream, workers=1):
    """Wide table: one row per SNR, capacity (and theta) columns per channel."""
    chans, res = _evaluate(cfg, workers)
    header = ["rho"]
    if cfg.mode in ("no-csi", "both"):
        header += [f"C_no_{label}" for label, _ in chans]
    if cfg.mode in ("partial-csi", "both"):
        header += [f"C_part_{label}" for label, _ in chans]
        header += [f"theta_{label}" for label, _ in chans]
    rows = []
    for ri, rho in enumerate(cfg.rho):
        row = [float(rho)]
        if cfg.mode in ("no-csi", "both"):
            row += [res[ci, ri]["c_no"] for ci in range(len(chans))]
        if cfg.mode in ("partial-csi", "both"):
            row += [res[ci, ri]["c_part"] for ci in range(len(chans))]
            row += [float(res[ci, ri]["theta"]) for ci in range(len(chans))]
        rows.append(row)
    _write_csv(stream, cfg, [f"mode={cfg.mode} units=nats/s"], header, rows)


def cmd_sweep(cfg, stream, workers=1):
    """Long table over channels x SNR, headed by statistical-CSI crossover SNRs."""
    sweep_cfg = replace(cfg, mode="both")
    chans, res = _evaluate(sweep_cfg, workers)
    comments = ["units=nats/s"]
    ds = sorted(cfg.d_values)
    positive = [r for r in cfg.rho if r > 0]
    if len(positive) >= 2:
        for d1, d2 in zip(ds, ds[1:]):
            rho_star, _ = partial_csi_crossover(OuVariance(d1, cfg.W), OuVariance(d2, cfg.W),
                                                positive, cfg.W)
            text = "none in range" if rho_star is None else _fmt(rho_star)
            comments.append(f"partial-csi crossover d1={_fmt(d1)} d2={_fmt(d2)} rho*={text}")
    header = ["channel", "rho", "C_no", "C_part", "theta"]
    rows = []
    for ci, (label, _) in enumerate(chans):
        for ri, rho in enumerate(cfg.rho):
            r = res[ci, ri]
            rows.append([label, float(rho), r["c_no"], r["c_part"], float(r["theta"])])
    _write_csv(stream, cfg, comments, header, rows)


def cmd_validate(cfg, stream, perturb=1.0, workers=1):
    """Monte Carlo checks for every OU channel; returns the process exit status.

    0: all checks pass. 1: at least one check fails. 3: nothing fails but some
    checks are too noisy to be conclusive. (2 is left to usage errors.)
    """
    if cfg.kind != "ou":
        raise UsageError("validate needs an OU channel; uncorrelated scattering has no "
                         "time-domain sampler")
    checks = []
    pairs = [(None, cfg.a, cfg.b)] if cfg.a is not None else [(d, None, None) for d in cfg.d]
    for d, a, b in pairs:
        checks += validate_ou(d, cfg.W, rhos=cfg.mc.rho, n=cfg.mc.n, seed=cfg.mc.seed, M=cfg.mc.M,
                              T=cfg.mc.T, a=a, b=b, closed_form_scale=perturb,
                              workers=workers)
    stream.write(_config_echo(cfg) + "\n")
    for check in checks:
        stream.write(check.line() + "\n")
    failed = sum(c.status == "fail" for c in checks)
    weak = sum(c.status == "insufficient" for c in checks)
    stream.write(f"summary: {len(checks)} checks, {failed} failed, {weak} insufficient precision\n")
    if failed:
        return 1
    return 3 if weak else 0


# --- argument handling ----------------------------------------------------------


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI scenario file")
    common.add_argument("--d", help="comma-separated OU parameters d = a + b")
    common.add_argument("--a", type=float, help="OU correlation decay (with --b)")
    common.add_argument("--b", type=float, help="OU power decay (with --a)")
    common.add_argument("--uncorrelated", action="store_true",
                        help="use the flat uncorrelated-scattering spectrum")
    common.add_argument("--W", type=float, help="bandwidth in Hz (default 1)")
    common.add_argument("--rho", help="SNR grid: 'min:max:points' (log) or comma list")
    common.add_argument("--grid-size", type=int, help="frequency grid size")
    common.add_argument("--mode", choices=MODES)
    common.add_argument("--n", type=float, help="Monte Carlo realizations")
    common.add_argument("--M", type=int, help="Monte Carlo time grid size")
    common.add_argument("--T", type=float, help="Monte Carlo time horizon")
    common.add_argument("--seed", type=int, help="Monte Carlo seed")
    common.add_argument("--workers", type=int, default=1, help="parallel workers")
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("--dump-config", action="store_true",
                        help="print the effective configuration and exit")

    parser = argparse.ArgumentParser(
        prog="fadingcap",
        description="Average capacity of correlated-scattering Rayleigh fading channels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("variance", parents=[common], help="rearranged spectral fading variances")
    sub.add_parser("capacity", parents=[common], help="capacity versus SNR per channel")
    sub.add_parser("sweep", parents=[common], help="long-format channel x SNR sweep")
    val = sub.add_parser("validate", parents=[common], help="Monte Carlo oracle checks")
    val.add_argument("--perturb", type=float, default=1.0,
                     help="scale the closed-form spectrum targets (sensitivity check)")
    return parser


def config_from_args(args):
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    changes = {}
    if args.uncorrelated:
        changes["kind"] = "uncorrelated"
    if args.d is not None:
        try:
            changes.update(kind="ou", d=_floats(args.d), a=None, b=None)
        except ValueError:
            raise UsageError(f"--d: cannot parse {args.d!r}") from None
    if args.a is not None or args.b is not None:
        changes.update(kind="ou", a=args.a, b=args.b)
    if args.W is not None:
        changes["W"] = args.W
    if args.rho is not None:
        changes.update(rho=parse_rho(args.rho), rho_spec=args.rho)
    if args.grid_size is not None:
        changes["grid_size"] = args.grid_size
    if args.mode is not None:
        changes["mode"] = args.mode
    mc = {}
    for key in ("n", "M", "T", "seed"):
        val = getattr(args, key)
        if val is not None:
            mc[key] = int(val) if key in ("n", "M", "seed") else val
    if mc:
        changes["mc"] = replace(cfg.mc, **mc)
    return replace(cfg, **changes) if changes else cfg


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        buf = io.StringIO()
        status = 0
        if args.dump_config:
            buf.write(dump_config(cfg))
        elif args.command == "variance":
            cmd_variance(cfg, buf)
        elif args.command == "capacity":
            cmd_capacity(cfg, buf, workers=args.workers)
        elif args.command == "sweep":
            cmd_sweep(cfg, buf, workers=args.workers)
        else:
            status = cmd_validate(cfg, buf, perturb=args.perturb, workers=args.workers)
    except (UsageError, DomainError) as exc:
        parser.error(str(exc))
    except NumericalError as exc:
        print(f"fadingcap: numerical error: {exc}", file=sys.stderr)
        return 4
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return status


if __name__ == "__main__":
    sys.exit(main())

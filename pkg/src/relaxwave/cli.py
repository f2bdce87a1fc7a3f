"""Command-line frontend: ``relaxwave [options] COMMAND``.

Options come from (lowest to highest precedence) built-in defaults, a flat
``key = value`` config file given by ``--config``, and command-line flags.
Every output embeds the fully resolved configuration.

Exit codes: 0 ok, 1 error, 2 no traveling wave, 3 inconclusive verdict.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import __version__
from .errors import ConfigError, InvalidParams, NoTravelingWave, RelaxwaveError
from .evans import (
    EvansContext,
    HalfRingContour,
    lambda_curves,
    nyquist_export,
    real_axis_scan,
    stability_verdict,
    winding_number,
)
from .export import dumps_csv, dumps_json, write_text
from .poly import ModelParams
from .profile import WaveProfile, build_profile
from .simulate import SimConfig, simulate
from .speed import EmptyCurve, MonotoneCurve, default_c_grid, solve_c_for_a, trace_curve

log = logging.getLogger("relaxwave")

COMMANDS = ("profile", "speedcurve", "evans", "winding", "lambda-curves", "simulate", "verdict")
EXIT_OK, EXIT_ERROR, EXIT_NO_TW, EXIT_INCONCLUSIVE = 0, 1, 2, 3


def _pos_int(v: str) -> int:
    n = int(v)
    if n <= 0:
        raise ValueError("must be a positive integer")
    return n


def _float_list(v: str) -> tuple:
    return tuple(float(x) for x in v.replace(";", ",").split(",") if x.strip())


def _choice(*options):
    def parse(v: str) -> str:
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return v

    return parse


@dataclass(frozen=True)
class Option:
    group: str
    parse: Callable[[str], Any]
    default: Any
    help: str


# key -> option; flag is "--key", config-file key is "key" (or with underscores)
OPTIONS: dict[str, Option] = {
    "a": Option("params", float, None, "threshold (derived from the speed curve if omitted)"),
    "b": Option("params", float, 0.5, "recovery coupling b"),
    "c": Option("params", float, None, "wave speed (derived from --a and --branch if omitted)"),
    "d": Option("params", float, 0.1, "recovery decay d"),
    "tau": Option("params", float, 0.1, "relaxation time tau"),
    "branch": Option("params", _choice("fast", "slow"), "fast", "branch used when only --a is given"),
    "r": Option("contour", float, 0.1, "inner half-ring radius"),
    "R": Option("contour", float, 20.0, "outer half-ring radius"),
    "n-arc": Option("contour", _pos_int, 1000, "initial samples per arc"),
    "n-seg": Option("contour", _pos_int, 1000, "initial samples per axis segment"),
    "lambda-max": Option("contour", float, None, "evans: scan the real axis (0, lambda-max] instead"),
    "c-min": Option("curve", float, 0.01, "smallest traced speed"),
    "c-max": Option("curve", float, None, "largest traced speed (default 0.999/sqrt(tau))"),
    "c-steps": Option("curve", _pos_int, 400, "number of traced speeds"),
    "k-max": Option("curve", float, 10.0, "lambda-curves: |k| range"),
    "k-steps": Option("curve", _pos_int, 401, "lambda-curves: number of k samples"),
    "z-min": Option("grid", float, None, "profile: left end of z grid"),
    "z-max": Option("grid", float, None, "profile: right end of z grid"),
    "nz": Option("grid", _pos_int, 2001, "profile: number of z samples"),
    "L": Option("sim", float, None, "half-width of the domain [-L, L]"),
    "nx": Option("sim", _pos_int, 8192, "grid points"),
    "dt": Option("sim", float, None, "time step (default: largest stable)"),
    "T": Option("sim", float, None, "final time (default 20/c)"),
    "eps": Option("sim", float, 0.0, "relative amplitude perturbation"),
    "heaviside": Option("sim", _choice("sharp", "smoothed"), "sharp", "Heaviside treatment"),
    "times": Option("sim", _float_list, None, "snapshot times, comma separated (default 0 and T)"),
    "out": Option("io", str, None, "output file (default stdout)"),
    "format": Option("io", _choice("csv", "json"), "csv", "output format"),
}


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    contour: dict = field(default_factory=dict)
    curve: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    output_path: Optional[str] = None
    format: str = "csv"

    def as_dict(self) -> dict:
        return asdict(self)

    def model_params(self, c: Optional[float] = None, a: Optional[float] = None) -> ModelParams:
        p = self.params
        return ModelParams(
            b=p["b"], c=p["c"] if c is None else c, d=p["d"], tau=p["tau"], a=p["a"] if a is None else a
        )

    def contour_obj(self) -> HalfRingContour:
        k = self.contour
        return HalfRingContour(r=k["r"], R=k["R"], n_arc=k["n-arc"], n_seg=k["n-seg"])


def _canonical_key(key: str) -> str:
    k = key.strip().lstrip("-").replace("_", "-")
    if k in OPTIONS:
        return k
    raise ConfigError(f"unknown config key {key.strip()!r}")


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.strip() == "command":
            out["command"] = value
            continue
        out[_canonical_key(key)] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="relaxwave",
        description="Traveling waves and Evans-function stability for the relaxing McKean system.",
        allow_abbrev=False,
    )
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--version", action="version", version=f"relaxwave {__version__}")
    for key, opt in OPTIONS.items():
        # raw strings, parsed later so file values and flags share validation
        p.add_argument(f"--{key}", dest=key, default=None, metavar=key.upper().replace("-", "_"), help=opt.help)
    return p


def _check(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _validate(cfg: RunConfig) -> None:
    p = cfg.params
    if p["c"] is None and p["a"] is None and cfg.command not in ("speedcurve",):
        raise ConfigError(f"command {cfg.command!r} needs --c or --a")
    _check(p["b"] > 0, "b > 0 violated")
    _check(p["d"] >= 0, "d >= 0 violated")
    _check(p["tau"] >= 0, "tau >= 0 violated")
    if p["a"] is not None:
        _check(p["a"] > 0, "a > 0 violated")
    if p["c"] is not None:
        _check(p["c"] > 0, "c > 0 violated")
        _check(p["c"] ** 2 * p["tau"] < 1, f"c² τ = {p['c'] ** 2 * p['tau']:.6g} ≥ 1 violated")
    k = cfg.contour
    _check(0 < k["r"] < k["R"], "0 < r < R violated")
    if k["lambda-max"] is not None:
        _check(k["lambda-max"] > 0, "lambda-max > 0 violated")
    cv = cfg.curve
    _check(cv["c-min"] > 0, "c-min > 0 violated")
    if cv["c-max"] is not None:
        _check(cv["c-max"] > cv["c-min"], "c-max > c-min violated")
        if p["tau"] > 0:
            _check(cv["c-max"] ** 2 * p["tau"] < 1, "c-max² τ < 1 violated")
    _check(cv["c-steps"] >= 3, "c-steps >= 3 violated")
    _check(cv["k-max"] > 0, "k-max > 0 violated")
    g = cfg.grid
    if g["z-min"] is not None and g["z-max"] is not None:
        _check(g["z-min"] < g["z-max"], "z-min < z-max violated")
    s = cfg.sim
    for key in ("L", "dt", "T"):
        if s[key] is not None:
            _check(s[key] > 0, f"{key} > 0 violated")
    _check(s["nx"] >= 5, "nx >= 5 violated")
    _check(s["eps"] > -1, "eps > -1 violated")
    if s["times"] is not None:
        _check(all(t >= 0 for t in s["times"]), "snapshot times >= 0 violated")


def parse_config(args: Sequence[str], file: Optional[str] = None) -> RunConfig:
    """Resolve defaults, config file and flags into a validated :class:`RunConfig`."""
    ns = build_parser().parse_args(list(args))
    raw: dict[str, str] = {}
    path = ns.config or file
    if path:
        raw.update(read_config_file(path))
    command = ns.command or raw.pop("command", None)
    raw.pop("command", None)
    if command is None:
        raise ConfigError("no command given")
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    for key in OPTIONS:
        v = getattr(ns, key)
        if v is not None:
            raw[key] = v
    cfg = RunConfig(command=command)
    for key, opt in OPTIONS.items():
        if key in raw:
            try:
                value = opt.parse(raw[key])
            except ValueError as e:
                raise ConfigError(f"bad value for {key}: {raw[key]!r} ({e})") from e
            if isinstance(value, float) and not math.isfinite(value):
                raise ConfigError(f"bad value for {key}: {raw[key]!r} (not finite)")
        else:
            value = opt.default
        if opt.group == "io":
            if key == "out":
                cfg.output_path = value
            else:
                cfg.format = value
        else:
            getattr(cfg, opt.group)[key] = value
    _validate(cfg)
    return cfg


# --- commands -------------------------------------------------------------


def _meta(cfg: RunConfig, **extra) -> dict:
    return {"relaxwave": __version__, "config": cfg.as_dict(), **extra}


def _c_grid(cfg: RunConfig):
    cv = cfg.curve
    return default_c_grid(cfg.params["tau"], n=cv["c-steps"], c_min=cv["c-min"], c_max=cv["c-max"])


def resolve_profile(cfg: RunConfig) -> WaveProfile:
    """The wave selected by the config (speed given, or threshold + branch)."""
    p = cfg.params
    if p["c"] is not None:
        return build_profile(cfg.model_params())
    curve = trace_curve(p["b"], p["d"], p["tau"], _c_grid(cfg))
    speeds = solve_c_for_a(p["a"], p["b"], p["d"], p["tau"], curve)
    if not speeds:
        raise NoTravelingWave(f"a={p['a']} lies above the fold a*={curve.a_star:.12g}")
    if len(speeds) == 1:
        c = speeds[0]
    else:
        c = speeds[1] if p["branch"] == "fast" else speeds[0]
    log.info("resolved c=%.15g on the %s branch", c, p["branch"])
    return build_profile(cfg.model_params(c=c))


def _profile_meta(prof: WaveProfile) -> dict:
    return {
        "params": prof.params.as_dict(),
        "s": prof.s,
        "z1": prof.z1,
        "alphas": list(prof.alphas.as_tuple()),
    }


def cmd_profile(cfg: RunConfig) -> tuple[str, int]:
    prof = resolve_profile(cfg)
    g = cfg.grid
    z_min = -10.0 / prof.alphas.r3.real if g["z-min"] is None else g["z-min"]
    z_max = prof.z1 + 10.0 * prof.decay_length() if g["z-max"] is None else g["z-max"]
    z = np.linspace(z_min, z_max, g["nz"])
    u, du, w = prof.evaluate(z)
    meta = _meta(cfg, wave=_profile_meta(prof))
    if cfg.format == "json":
        return dumps_json({**meta, "z": z, "u": u, "du": du, "w": w}), EXIT_OK
    return dumps_csv(meta, ["z", "u", "du", "w"], zip(z, u, du, w)), EXIT_OK


def cmd_speedcurve(cfg: RunConfig) -> tuple[str, int]:
    p = cfg.params
    try:
        curve = trace_curve(p["b"], p["d"], p["tau"], _c_grid(cfg))
    except EmptyCurve as e:
        raise NoTravelingWave(str(e)) from e
    meta = _meta(cfg, a_star=curve.a_star, c_star=curve.c_star, gaps=len(curve.gaps))
    rows = [(pt.c, pt.a, pt.s, pt.z1, pt.alpha3) for pt in curve.points]
    cols = ["c", "a", "s", "z1", "alpha3"]
    if cfg.format == "json":
        return dumps_json({**meta, **{k: [r[i] for r in rows] for i, k in enumerate(cols)}}), EXIT_OK
    return dumps_csv(meta, cols, rows), EXIT_OK


def cmd_evans(cfg: RunConfig) -> tuple[str, int]:
    prof = resolve_profile(cfg)
    ctx = EvansContext.from_profile(prof)
    meta = _meta(cfg, wave=_profile_meta(prof))
    lam_max = cfg.contour["lambda-max"]
    if lam_max is not None:
        lams, E = real_axis_scan(ctx, lam_max, cfg.contour["n-seg"])
        if cfg.format == "json":
            return dumps_json({**meta, "lambda": lams, "E": E}), EXIT_OK
        return dumps_csv(meta, ["lambda", "E"], zip(lams, E)), EXIT_OK
    lams, E = nyquist_export(ctx, cfg.contour_obj())
    cols = ["re_lambda", "im_lambda", "re_E", "im_E"]
    rows = zip(lams.real, lams.imag, E.real, E.imag)
    if cfg.format == "json":
        return dumps_json({**meta, "lambda": lams, "E": E}), EXIT_OK
    return dumps_csv(meta, cols, rows), EXIT_OK


def cmd_winding(cfg: RunConfig) -> tuple[str, int]:
    prof = resolve_profile(cfg)
    res = winding_number(EvansContext.from_profile(prof), cfg.contour_obj())
    body = {
        "n_zeros": res.n_zeros,
        "min_abs_E": res.min_abs_E,
        "total_arg": res.total_arg,
        "samples": res.samples,
        "refined": res.refined,
        "pattern_breaks": res.pattern_breaks,
        "contour": {"r": res.contour.r, "R": res.contour.R},
    }
    meta = _meta(cfg, wave=_profile_meta(prof))
    # a single record: JSON regardless of --format
    return dumps_json({**meta, **body}), EXIT_OK


def cmd_lambda_curves(cfg: RunConfig) -> tuple[str, int]:
    params = cfg.model_params() if cfg.params["c"] is not None else resolve_profile(cfg).params
    k = np.linspace(-cfg.curve["k-max"], cfg.curve["k-max"], cfg.curve["k-steps"])
    lc = lambda_curves(params, k)
    br = lc.branches
    meta = _meta(cfg, params=params.as_dict())
    cols = ["k"] + [f"{p}_lambda_{j}" for j in (1, 2, 3) for p in ("re", "im")]
    rows = [[kk] + [v for j in range(3) for v in (br[i, j].real, br[i, j].imag)] for i, kk in enumerate(k)]
    if cfg.format == "json":
        return dumps_json({**meta, "k": k, "branches": [br[:, j] for j in range(3)]}), EXIT_OK
    return dumps_csv(meta, cols, rows), EXIT_OK


def cmd_simulate(cfg: RunConfig) -> tuple[str, int]:
    prof = resolve_profile(cfg)
    s = cfg.sim
    sc = SimConfig.for_profile(prof, T=s["T"], nx=s["nx"], dt=s["dt"], perturb_eps=s["eps"], heaviside_mode=s["heaviside"])
    if s["L"] is not None:
        shift = s["L"] - sc.L
        sc = SimConfig(
            L=s["L"], nx=sc.nx, T=sc.T, dt=sc.dt, perturb_eps=sc.perturb_eps,
            heaviside_mode=sc.heaviside_mode, front_x0=sc.front_x0 + shift,
        )
    times = (0.0, sc.T) if s["times"] is None else s["times"]
    run = simulate(prof, sc, snapshot_times=times)
    summary = {**run.summary(), "L": sc.L, "nx": sc.nx, "T": sc.T, "dt": run.final.dt}
    meta = _meta(cfg, wave=_profile_meta(prof))
    if cfg.format == "json":
        return dumps_json({**meta, "summary": summary}), EXIT_OK
    rows = []
    for t in sorted(run.snapshots):
        x, u, w = run.snapshots[t]
        rows.extend((t, xi, ui, wi) for xi, ui, wi in zip(x, u, w))
    return dumps_csv({**meta, "summary": summary}, ["t", "x", "u", "w"], rows), EXIT_OK


def cmd_verdict(cfg: RunConfig) -> tuple[str, int]:
    prof = resolve_profile(cfg)
    k = cfg.contour
    out = stability_verdict(EvansContext.from_profile(prof), n_arc=k["n-arc"], n_seg=k["n-seg"])
    code = EXIT_INCONCLUSIVE if out["verdict"] == "inconclusive" else EXIT_OK
    return dumps_json({**_meta(cfg, wave=_profile_meta(prof)), **out}), code


HANDLERS = {
    "profile": cmd_profile,
    "speedcurve": cmd_speedcurve,
    "evans": cmd_evans,
    "winding": cmd_winding,
    "lambda-curves": cmd_lambda_curves,
    "simulate": cmd_simulate,
    "verdict": cmd_verdict,
}


def run(cfg: RunConfig) -> int:
    """Execute one command; write its artifact; return the exit code."""
    try:
        text, code = HANDLERS[cfg.command](cfg)
    except NoTravelingWave as e:
        log.error("no traveling wave: %s", e)
        return EXIT_NO_TW
    except (RelaxwaveError, MonotoneCurve, ValueError) as e:
        log.error("%s: %s", type(e).__name__, e)
        return EXIT_ERROR
    write_text(text, Path(cfg.output_path) if cfg.output_path else None)
    return code


def _setup_logging() -> None:
    level = os.environ.get("RELAXWAVE_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except (ConfigError, InvalidParams) as e:
        print(f"relaxwave: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except SystemExit as e:  # argparse usage errors / --help
        return int(e.code or 0) and EXIT_ERROR
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

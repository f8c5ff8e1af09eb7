"""Command-line front end.

    fsocap params     --config link.ini
    fsocap capacity   --format json --output cap.json
    fsocap penalty
    fsocap scaling
    fsocap montecarlo --samples 1000000 --seed 7

Every command accepts ``--config``, ``--output``, ``--format`` and ``--seed``.
Values given on the command line override the config file, which in turn
overrides the built-in defaults (a 1550 nm, 1.8 km link with three
turbulence scenarios).

Exit codes: 0 success, 2 configuration error, 3 numerical failure (the
failing points are listed in the output and on stderr).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import re
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, capacity as cap
from .channel import GGOnly, GGPointing, cdf, iter_irradiance, mean_irradiance
from .linkmodel import (
    BeamApertureWarning,
    LinkGeometry,
    TurbulenceState,
    derive_pointing_state,
)
from .numerics import ConvergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

SCENARIO_NAMES = {0.8: "weak", 2.0: "moderate", 6.0: "strong"}
DEFAULT_RYTOV = (0.8, 2.0, 6.0)
DEFAULT_SNR_DB = tuple(float(v) for v in range(-10, 61, 2))
DEFAULT_SWEEP = tuple(round(0.8 + 0.1 * i, 10) for i in range(113))  # 0.8 .. 12.0
METHOD_NAMES = {m.value.lower(): m for m in cap.Method}
MIN_MC_SAMPLES = 10_000
_SIG = 12

_UNITS = {"nm": 1e-9, "um": 1e-6, "mm": 1e-3, "cm": 1e-2, "m": 1.0, "km": 1e3}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


# -- configuration -----------------------------------------------------------


def parse_length(text: str, fieldname: str) -> float:
    """``'1550nm'``, ``'1.2 cm'``, ``'1800'`` (metres) -> metres."""
    m = re.fullmatch(r"\s*([-+0-9.eE]+)\s*([a-z]*)\s*", str(text))
    if not m:
        raise ConfigError(f"{fieldname}: cannot parse length {text!r}")
    unit = m.group(2) or "m"
    if unit not in _UNITS:
        raise ConfigError(f"{fieldname}: unknown unit {unit!r} (use nm, um, mm, cm, m, km)")
    try:
        return float(m.group(1)) * _UNITS[unit]
    except ValueError:
        raise ConfigError(f"{fieldname}: cannot parse number {m.group(1)!r}") from None


def parse_grid(text: str, fieldname: str) -> tuple[float, ...]:
    """Comma list ``'0, 10, 20'`` or range ``'start:stop:step'`` (inclusive)."""
    text = str(text).strip()
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ConfigError(f"{fieldname}: step must be positive")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = tuple(round(start + i * step, 10) for i in range(max(count, 0)))
        else:
            values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{fieldname}: cannot parse grid {text!r}") from None
    if not values:
        raise ConfigError(f"{fieldname}: grid is empty")
    if any(not math.isfinite(v) for v in values):
        raise ConfigError(f"{fieldname}: grid values must be finite")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{fieldname}: grid must be strictly increasing")
    return values


def _parse_bool(text, fieldname):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{fieldname}: expected a boolean, got {text!r}")


@dataclass
class ScenarioConfig:
    geometry: LinkGeometry = field(default_factory=LinkGeometry)
    rytov_variance: tuple[float, ...] | None = DEFAULT_RYTOV
    cn2: tuple[float, ...] | None = None
    pointing: bool = True
    scheme: str = "HD"
    noise_density: float = 1.0
    snr_db: tuple[float, ...] = DEFAULT_SNR_DB
    sweep: tuple[float, ...] = DEFAULT_SWEEP
    methods: tuple[str, ...] = ("Exact",)
    no_pe_gain_scale: bool = True
    allow_low_power: bool = False
    samples: int = 1_000_000
    mc_snr_db: float = 20.0
    jobs: int = 1

    def validate(self):
        if (self.rytov_variance is None) == (self.cn2 is None):
            raise ConfigError("turbulence: give exactly one of rytov_variance or cn2")
        values = self.rytov_variance if self.rytov_variance is not None else self.cn2
        if any(not v > 0 for v in values):
            raise ConfigError("turbulence: values must be positive")
        if self.scheme not in ("HD", "IMDD", "both"):
            raise ConfigError("scheme: must be HD, IMDD or both")
        if not self.noise_density > 0:
            raise ConfigError("scheme.noise_density: must be positive")
        if any(v <= 0 for v in self.sweep):
            raise ConfigError("sweep.rytov: values must be positive")
        if self.samples < MIN_MC_SAMPLES:
            raise ConfigError(f"montecarlo.samples: need at least {MIN_MC_SAMPLES}")
        if self.jobs < 1:
            raise ConfigError("jobs: must be >= 1")
        for name in self.methods:
            if name.lower() not in METHOD_NAMES:
                raise ConfigError(f"capacity.methods: unknown method {name!r}")
        if not self.pointing and self.geometry.jitter_sigma > 0:
            self.geometry = LinkGeometry(**{**asdict(self.geometry), "jitter_sigma": 0.0})
        return self

    def schemes(self) -> list[cap.DetectionScheme]:
        kinds = ("HD", "IMDD") if self.scheme == "both" else (self.scheme,)
        return [cap.DetectionScheme(k, self.noise_density) for k in kinds]

    def echo(self) -> dict:
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out


def load_config(path: str | None) -> ScenarioConfig:
    cfg = ScenarioConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path!r}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from None

    known = {
        "geometry": {"wavelength", "beam_waist", "path_length", "aperture_radius", "jitter_sigma"},
        "turbulence": {"rytov_variance", "cn2"},
        "pointing": {"enabled"},
        "scheme": {"scheme", "noise_density"},
        "sweep": {"snr_db", "rytov"},
        "capacity": {"methods", "no_pe_gain_scale", "allow_low_power"},
        "montecarlo": {"samples", "snr_db"},
        "run": {"jobs"},
    }
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"config: unknown section [{section}]")
        extra = set(parser[section]) - known[section]
        if extra:
            raise ConfigError(f"[{section}]: unknown key(s) {', '.join(sorted(extra))}")

    if parser.has_section("geometry"):
        geo = asdict(cfg.geometry)
        for key, value in parser["geometry"].items():
            geo[key] = parse_length(value, f"geometry.{key}")
        try:
            cfg.geometry = LinkGeometry(**geo)
        except ValueError as exc:
            raise ConfigError(f"geometry: {exc}") from None
    if parser.has_section("turbulence"):
        sec = parser["turbulence"]
        if "rytov_variance" in sec and "cn2" in sec:
            raise ConfigError("turbulence: give exactly one of rytov_variance or cn2")
        if "cn2" in sec:
            cfg.cn2 = parse_grid(sec["cn2"], "turbulence.cn2")
            cfg.rytov_variance = None
        elif "rytov_variance" in sec:
            cfg.rytov_variance = parse_grid(sec["rytov_variance"], "turbulence.rytov_variance")
    if parser.has_option("pointing", "enabled"):
        cfg.pointing = _parse_bool(parser["pointing"]["enabled"], "pointing.enabled")
    if parser.has_section("scheme"):
        sec = parser["scheme"]
        cfg.scheme = sec.get("scheme", cfg.scheme).strip()
        if "noise_density" in sec:
            cfg.noise_density = _float(sec["noise_density"], "scheme.noise_density")
    if parser.has_section("sweep"):
        sec = parser["sweep"]
        if "snr_db" in sec:
            cfg.snr_db = parse_grid(sec["snr_db"], "sweep.snr_db")
        if "rytov" in sec:
            cfg.sweep = parse_grid(sec["rytov"], "sweep.rytov")
    if parser.has_section("capacity"):
        sec = parser["capacity"]
        if "methods" in sec:
            cfg.methods = tuple(v.strip() for v in sec["methods"].split(",") if v.strip())
        if "no_pe_gain_scale" in sec:
            cfg.no_pe_gain_scale = _parse_bool(sec["no_pe_gain_scale"], "capacity.no_pe_gain_scale")
        if "allow_low_power" in sec:
            cfg.allow_low_power = _parse_bool(sec["allow_low_power"], "capacity.allow_low_power")
    if parser.has_section("montecarlo"):
        sec = parser["montecarlo"]
        if "samples" in sec:
            cfg.samples = _int(sec["samples"], "montecarlo.samples")
        if "snr_db" in sec:
            cfg.mc_snr_db = _float(sec["snr_db"], "montecarlo.snr_db")
    if parser.has_option("run", "jobs"):
        cfg.jobs = _int(parser["run"]["jobs"], "run.jobs")
    return cfg


def _float(text, fieldname):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{fieldname}: expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{fieldname}: must be finite")
    return value


def _int(text, fieldname):
    try:
        return int(float(text))
    except ValueError:
        raise ConfigError(f"{fieldname}: expected an integer, got {text!r}") from None


# -- scenarios ---------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    name: str
    turbulence: TurbulenceState
    pointing: object  # PointingState

    def models(self, cfg: ScenarioConfig) -> list[tuple[str, object]]:
        t, p = self.turbulence, self.pointing
        scale = p.A0 if cfg.no_pe_gain_scale else 1.0
        out = []
        if cfg.pointing and p.has_jitter:
            out.append(("GGPointing", GGPointing(t.a, t.b, p.xi, p.A0)))
        out.append(("GGOnly", GGOnly(t.a, t.b, scale)))
        return out


def _scenario_name(rytov, cn2=None):
    if cn2 is not None:
        return f"cn2={cn2:.4g}"
    return SCENARIO_NAMES.get(round(rytov, 10), f"rytov={rytov:g}")


def build_scenarios(cfg: ScenarioConfig) -> list[Scenario]:
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BeamApertureWarning)
        if cfg.cn2 is not None:
            for c in cfg.cn2:
                t = TurbulenceState.from_cn2(c, cfg.geometry)
                out.append(Scenario(_scenario_name(t.rytov_variance, c), t, derive_pointing_state(cfg.geometry, c)))
        else:
            for r in cfg.rytov_variance:
                t = TurbulenceState.from_rytov(r, cfg.geometry)
                out.append(Scenario(_scenario_name(r), t, derive_pointing_state(cfg.geometry, t.cn2)))
    return out


# -- commands ----------------------------------------------------------------


@dataclass
class Result:
    command: str
    series: list[dict]
    errors: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def cmd_params(cfg: ScenarioConfig) -> Result:
    cols = [
        "scenario", "rytov", "cn2", "a", "b", "rho0", "epsilon", "w_L", "v",
        "A0", "w_Leq", "xi", "mean_irradiance", "mean_irradiance_db",
    ]
    rows = []
    for sc in build_scenarios(cfg):
        t, p = sc.turbulence, sc.pointing
        if cfg.pointing and p.has_jitter:
            mean = mean_irradiance(GGPointing(t.a, t.b, p.xi, p.A0))
        else:
            mean = p.A0 if cfg.no_pe_gain_scale else 1.0
        rows.append([
            sc.name, t.rytov_variance, t.cn2, t.a, t.b, p.rho0, p.epsilon, p.w_L, p.v,
            p.A0, p.w_Leq, p.xi if (cfg.pointing and p.has_jitter) else math.inf,
            mean, 10.0 * math.log10(mean),
        ])
    return Result("params", [{"name": "params", "columns": cols, "rows": rows}])


def _capacity_point(job):
    method, model, scheme, snr, allow = job
    try:
        if method is cap.Method.EXACT:
            pt = cap.capacity_exact(model, scheme, snr, allow_low_power=allow)
        elif method is cap.Method.ORACLE:
            pt = cap.capacity_oracle(model, scheme, snr, allow_low_power=allow)
        elif method is cap.Method.ASYMPTOTIC_LOW:
            pt = cap.capacity_asymptotic_low(model, scheme, snr)
        elif method is cap.Method.ASYMPTOTIC_HIGH:
            pt = cap.capacity_asymptotic_high(model, scheme, snr)
        else:
            raise ValueError(f"method {method.value} is not available in sweeps")
        return ("ok", pt.threshold, pt.capacity)
    except cap.ValidityError as exc:
        return ("validity", str(exc))
    except (ConvergenceError, ValueError, FloatingPointError) as exc:
        return ("numerical", str(exc))


def _in_domain(method, scheme, snr):
    if method is cap.Method.ASYMPTOTIC_LOW:
        return scheme.kind == "HD" and snr < 1
    if method is cap.Method.ASYMPTOTIC_HIGH:
        return snr > 1
    return True


def _run_jobs(jobs, fn, n_workers):
    if n_workers <= 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        # map preserves submission order
        return list(pool.map(fn, jobs))


def cmd_capacity(cfg: ScenarioConfig, methods=None) -> Result:
    methods = [METHOD_NAMES[m.lower()] for m in (methods or cfg.methods)]
    if cap.Method.MONTE_CARLO in methods:
        raise ConfigError("capacity.methods: use the montecarlo command for MonteCarlo")
    cols = ["snr_db", "received_snr_db", "mu", "capacity_nats", "capacity_bits"]
    plan = []
    for sc in build_scenarios(cfg):
        for model_name, model in sc.models(cfg):
            rx_offset = 10.0 * math.log10(mean_irradiance(model))
            for scheme in cfg.schemes():
                for method in methods:
                    grid = [d for d in cfg.snr_db if _in_domain(method, scheme, 10 ** (d / 10))]
                    plan.append((sc, model_name, model, scheme, method, grid, rx_offset))
    jobs = [
        (method, model, scheme, 10.0 ** (d / 10.0), cfg.allow_low_power)
        for (_, _, model, scheme, method, grid, _) in plan
        for d in grid
    ]
    outcomes = iter(_run_jobs(jobs, _capacity_point, cfg.jobs))

    series, errors = [], []
    for sc, model_name, model, scheme, method, grid, rx_offset in plan:
        name = f"{sc.name}/{model_name}/{scheme.kind}/{method.value}"
        rows = []
        for d in grid:
            out = next(outcomes)
            if out[0] == "ok":
                _, mu, c = out
                rows.append([d, d + rx_offset, mu, c, c * cap.NATS_TO_BITS])
            else:
                errors.append({"series": name, "snr_db": d, "kind": out[0], "message": out[1]})
        series.append({
            "name": name, "scenario": sc.name, "rytov": sc.turbulence.rytov_variance,
            "model": model_name, "scheme": scheme.kind, "method": method.value,
            "columns": cols, "rows": rows,
        })
    return Result("capacity", series, errors)


def _sweep_states(cfg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BeamApertureWarning)
        for r in cfg.sweep:
            t = TurbulenceState.from_rytov(r, cfg.geometry)
            yield r, t, derive_pointing_state(cfg.geometry, t.cn2)


def cmd_penalty(cfg: ScenarioConfig) -> Result:
    cols = ["rytov", "penalty_bits_with_pe", "penalty_bits_no_pe", "A0", "xi"]
    rows = []
    for r, t, p in _sweep_states(cfg):
        no_pe = cap.penalty_high_snr(GGOnly(t.a, t.b)) * cap.NATS_TO_BITS
        if p.has_jitter:
            with_pe = cap.penalty_high_snr(GGPointing(t.a, t.b, p.xi, p.A0)) * cap.NATS_TO_BITS
        else:
            with_pe = cap.penalty_high_snr(GGOnly(t.a, t.b, p.A0)) * cap.NATS_TO_BITS
        rows.append([r, with_pe, no_pe, p.A0, p.xi])
    return Result("penalty", [{"name": "penalty", "columns": cols, "rows": rows}])


def cmd_scaling(cfg: ScenarioConfig) -> Result:
    cols = ["rytov", "A0_over_4ab", "one_over_4ab", "A0"]
    rows = []
    for r, t, p in _sweep_states(cfg):
        base = cap.low_snr_scaling_factor(GGOnly(t.a, t.b))
        rows.append([r, p.A0 * base, base, p.A0])
    return Result("scaling", [{"name": "scaling", "columns": cols, "rows": rows}])


def montecarlo_report(model, scheme, snr, samples, seed):
    """Empirical vs closed-form mean, CDF at the threshold and efficiency."""
    mu = cap.solve_threshold(model, snr)
    s1 = s2 = below = 0.0
    g1 = g2 = 0.0
    for chunk in iter_irradiance(model, seed, samples):
        s1 += float(chunk.sum())
        s2 += float((chunk * chunk).sum())
        below += float(np.count_nonzero(chunk <= mu))
        gain = np.log(np.maximum(chunk, mu) / mu)
        g1 += float(gain.sum())
        g2 += float((gain * gain).sum())
    n = samples

    def stats(t1, t2):
        mean = t1 / n
        var = max(t2 / n - mean * mean, 0.0) * n / (n - 1)
        return mean, math.sqrt(var / n)

    m_emp, m_se = stats(s1, s2)
    p_emp = below / n
    c_emp, c_se = stats(g1, g2)
    p_true = cdf(mu, model)
    rows = []
    for quantity, emp, closed, se in (
        ("mean_irradiance", m_emp, mean_irradiance(model), m_se),
        ("cdf_at_mu", p_emp, p_true, math.sqrt(max(p_true * (1 - p_true), 1e-300) / n)),
        ("efficiency_nats", c_emp / scheme.k, cap.capacity_at_threshold(mu, model, scheme), c_se / scheme.k),
    ):
        z = (emp - closed) / se if se > 0 else 0.0
        rows.append([quantity, emp, closed, se, z, "pass" if abs(z) <= 3.0 else "fail"])
    return mu, rows


def cmd_montecarlo(cfg: ScenarioConfig, seed: int) -> Result:
    cols = ["quantity", "empirical", "closed_form", "std_error", "z_score", "verdict"]
    snr = 10.0 ** (cfg.mc_snr_db / 10.0)
    series, errors, notes = [], [], []
    if cfg.samples < 1_000_000:
        notes.append(
            f"{cfg.samples} samples: standard errors are wide; the 3-sigma gates are correspondingly loose"
        )
    for sc in build_scenarios(cfg):
        for model_name, model in sc.models(cfg):
            for scheme in cfg.schemes():
                name = f"{sc.name}/{model_name}/{scheme.kind}/MonteCarlo"
                try:
                    if scheme.kind == "IMDD" and not cfg.allow_low_power and cfg.mc_snr_db < cap.IMDD_MIN_SNR_DB:
                        raise cap.ValidityError("IM/DD below the validity floor")
                    mu, rows = montecarlo_report(model, scheme, snr, cfg.samples, seed)
                except cap.ValidityError as exc:
                    errors.append({"series": name, "snr_db": cfg.mc_snr_db, "kind": "validity", "message": str(exc)})
                    continue
                except (ConvergenceError, ValueError) as exc:
                    errors.append({"series": name, "snr_db": cfg.mc_snr_db, "kind": "numerical", "message": str(exc)})
                    continue
                for row in rows:
                    if row[-1] == "fail":
                        errors.append({
                            "series": name, "snr_db": cfg.mc_snr_db, "kind": "montecarlo",
                            "message": f"{row[0]} outside 3 standard errors (z={row[4]:.2f})",
                        })
                series.append({
                    "name": name, "scenario": sc.name, "model": model_name, "scheme": scheme.kind,
                    "snr_db": cfg.mc_snr_db, "mu": mu, "samples": cfg.samples,
                    "columns": cols, "rows": rows,
                })
    return Result("montecarlo", series, errors, notes)


# -- output ------------------------------------------------------------------


def _fmt(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(value)
    v = float(value)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.{_SIG}g}"


def _json_value(value):
    if isinstance(value, str):
        return value
    v = float(value)
    if not math.isfinite(v):
        return _fmt(v)
    return float(f"{v:.{_SIG}g}")


_META_KEYS = ("scenario", "rytov", "model", "scheme", "method", "snr_db", "mu", "samples")


def render_csv(result: Result) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header_written = False
    for s in result.series:
        meta = [k for k in _META_KEYS if k in s]
        if not header_written:
            writer.writerow(["series", *meta, *s["columns"]])
            header_written = True
        for row in s["rows"]:
            writer.writerow([s["name"], *(_fmt(s[k]) for k in meta), *(_fmt(v) for v in row)])
    if not header_written:
        writer.writerow(["series"])
    return buf.getvalue()


def render_json(result: Result, cfg: ScenarioConfig, seed: int) -> str:
    series = []
    for s in result.series:
        entry = {k: (_json_value(v) if k not in ("name", "columns", "rows") else v) for k, v in s.items()}
        entry["rows"] = [[_json_value(v) for v in row] for row in s["rows"]]
        series.append(entry)
    doc = {
        "meta": {
            "command": result.command,
            "version": __version__,
            "seed": seed,
            "config": _jsonable(cfg.echo()),
            "notes": result.notes,
        },
        "series": series,
        "errors": result.errors,
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return _fmt(obj)
    return obj


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [geometry], [turbulence], ... sections")
    common.add_argument("--output", help="write here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, default=20240101, help="RNG seed (montecarlo)")
    common.add_argument("--rytov", help="Rytov variance list or start:stop:step")
    common.add_argument("--cn2", help="C_n^2 list in m^-2/3 (instead of --rytov)")
    common.add_argument("--jitter", help="jitter standard deviation, e.g. 0.1m or 5cm")
    common.add_argument("--no-pointing", action="store_true", help="disable the jitter model")
    common.add_argument("--scheme", choices=("HD", "IMDD", "both"))
    common.add_argument("--jobs", type=int, help="worker processes for sweeps")

    parser = argparse.ArgumentParser(prog="fsocap", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("params", parents=[common], help="derived channel parameters per scenario")

    p_cap = sub.add_parser("capacity", parents=[common], help="capacity versus transmit SNR")
    p_cap.add_argument("--snr-db", help="SNR grid in dB, list or start:stop:step")
    p_cap.add_argument("--methods", help="comma list of Exact, Oracle, AsymptoticLow, AsymptoticHigh")
    p_cap.add_argument(
        "--no-pe-gain-scale", choices=("on", "off"),
        help="apply A0 as a gain scale to the jitter-free channel (default on)",
    )
    p_cap.add_argument("--allow-low-power", action="store_true", help="evaluate IM/DD below its validity floor")

    for name, text in (("penalty", "high-SNR capacity penalty sweep"), ("scaling", "low-SNR scaling factor sweep")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--sweep", help="Rytov-variance grid, list or start:stop:step")

    p_mc = sub.add_parser("montecarlo", parents=[common], help="Monte-Carlo check of the closed forms")
    p_mc.add_argument("--samples", type=int)
    p_mc.add_argument("--snr-db", dest="mc_snr_db", type=float)
    p_mc.add_argument("--allow-low-power", action="store_true")
    return parser


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    if args.rytov and args.cn2:
        raise ConfigError("turbulence: give exactly one of --rytov or --cn2")
    if args.rytov:
        cfg.rytov_variance, cfg.cn2 = parse_grid(args.rytov, "--rytov"), None
    if args.cn2:
        cfg.cn2, cfg.rytov_variance = parse_grid(args.cn2, "--cn2"), None
    if args.jitter is not None:
        try:
            cfg.geometry = LinkGeometry(**{**asdict(cfg.geometry), "jitter_sigma": parse_length(args.jitter, "--jitter")})
        except ValueError as exc:
            raise ConfigError(f"--jitter: {exc}") from None
    if args.no_pointing:
        cfg.pointing = False
    if args.scheme:
        cfg.scheme = args.scheme
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if getattr(args, "snr_db", None):
        cfg.snr_db = parse_grid(args.snr_db, "--snr-db")
    if getattr(args, "methods", None):
        cfg.methods = tuple(v.strip() for v in args.methods.split(",") if v.strip())
    if getattr(args, "no_pe_gain_scale", None):
        cfg.no_pe_gain_scale = args.no_pe_gain_scale == "on"
    if getattr(args, "allow_low_power", False):
        cfg.allow_low_power = True
    if getattr(args, "sweep", None):
        cfg.sweep = parse_grid(args.sweep, "--sweep")
    if getattr(args, "samples", None) is not None:
        cfg.samples = args.samples
    if getattr(args, "mc_snr_db", None) is not None:
        cfg.mc_snr_db = args.mc_snr_db
    if cfg.geometry.jitter_sigma == 0:
        cfg.pointing = False
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "params":
            result = cmd_params(cfg)
        elif args.command == "capacity":
            result = cmd_capacity(cfg)
        elif args.command == "penalty":
            result = cmd_penalty(cfg)
        elif args.command == "scaling":
            result = cmd_scaling(cfg)
        else:
            result = cmd_montecarlo(cfg, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    text = render_json(result, cfg, args.seed) if args.format == "json" else render_csv(result)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)
    if result.errors:
        for err in result.errors:
            print(f"error: {err['series']} @ {err['snr_db']} dB: {err['message']}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK

"""Monte-Carlo experiment engine behind the command-line interface.

Channels for trial t come from the derived stream SeedSequence(seed,
spawn_key=(0, t)), re-instantiated per sweep cell, so every scheme and every
sweep value sees the same randomness at the same trial (paired comparison).
Optimizer starts get their own streams keyed by (trial, start index, scheme),
which keeps multistart runs nested: start 0 of a multistart=3 run is exactly
the multistart=1 run.
"""

from __future__ import annotations

import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from csv import DictReader
from dataclasses import dataclass, fields as dataclass_fields

import numpy as np

from .baselines import _solve_dris, _solve_fixed_theta, random_symmetric_unitary
from .channels import (ChannelSet, SystemConfig, cee_variances, default_config,
                       draw_channels)
from .objective import capacities, capacities_imcsi
from .solver import SolverParams, pprcgd, unitarity_residual

__all__ = [
    "ConfigError", "ExperimentSpec", "TrialResult", "COLUMNS", "build_spec",
    "parse_config", "parse_sweep_arg", "run_experiment", "compute_rmse",
    "write_results", "read_results", "trial_channels", "summarize",
]


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""


# sweep axis -> value type; also the closed set of recognized sweep names
SWEEP_TYPES = {
    "p": float, "n_t": int, "n_b": int, "n_e": int, "m": int,
    "x_b": float, "delta": float,
}


@dataclass(frozen=True)
class TrialResult:
    scheme: str
    sweep_name: str
    sweep_value: object        # int | float | "" when no sweep is active
    trial: int
    seed: int
    sr_bps_hz: float
    rb_bps_hz: float
    re_bps_hz: float
    wall_s: float
    outer_iters: int
    final_eta: float
    unitarity_residual: float
    termination: str


COLUMNS = tuple(f.name for f in dataclass_fields(TrialResult))


@dataclass(frozen=True)
class _Scheme:
    token: str
    name: str                  # row label, e.g. GC4
    kind: str                  # fc | gc | dris | random | wo | upper
    groups: int | None
    code: int                  # stable component of the start-stream key


def _parse_scheme(token) -> _Scheme:
    t = str(token).strip().lower()
    if t == "fc":
        return _Scheme(t, "FC", "fc", 1, 1)
    if t.startswith("gc") and t[2:].isdigit():
        k = int(t[2:])
        if k < 1:
            raise ConfigError(f"scheme {token!r}: group count must be >= 1")
        return _Scheme(t, f"GC{k}", "gc", k, 2)
    if t == "dris":
        return _Scheme(t, "DRIS", "dris", None, 3)
    if t == "random":
        return _Scheme(t, "RANDOM_FC", "random", None, 4)
    if t == "wo":
        return _Scheme(t, "WO_RIS", "wo", None, 5)
    if t == "upper":
        return _Scheme(t, "UPPER_FC", "upper", 1, 6)
    raise ConfigError(f"unknown scheme {token!r} "
                      "(expected fc, gc<k>, dris, random, wo, or upper)")


def _apply_sweep(cfg: SystemConfig, name: str, value) -> SystemConfig:
    try:
        if name == "p":
            return cfg.with_(p=float(value))
        if name == "n_t":
            return cfg.with_(n_t=int(value))
        if name == "n_b":
            return cfg.with_(n_b=int(value))
        if name == "n_e":
            return cfg.with_(n_e=int(value))
        if name == "m":
            return cfg.with_(m=int(value))
        if name == "x_b":
            return cfg.with_(pos_bob=(float(value), cfg.pos_bob[1]))
        if name == "delta":
            return cfg  # handled outside the system config
    except ValueError as exc:
        raise ConfigError(f"sweep {name}={value!r}: {exc}") from exc
    raise ConfigError(f"unknown sweep axis {name!r} "
                      f"(expected one of {', '.join(sorted(SWEEP_TYPES))})")


@dataclass(frozen=True)
class ExperimentSpec:
    cfg: SystemConfig
    schemes: tuple = ("fc",)
    sweep_name: str = ""
    sweep_values: tuple = ()
    trials: int = 50
    seed: int = 1
    csi: str = "perfect"
    deltas: tuple = ()
    multistart: int = 1
    out: str | None = None
    fmt: str = "csv"
    jobs: int = 1
    solver: SolverParams = SolverParams()

    def __post_init__(self):
        for name in ("trials", "multistart", "jobs"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if self.fmt not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.fmt!r}")
        if self.csi not in ("perfect", "imperfect"):
            raise ConfigError(f"csi must be perfect or imperfect, got {self.csi!r}")
        if not self.schemes:
            raise ConfigError("schemes must be nonempty")
        parsed = [_parse_scheme(t) for t in self.schemes]
        names = [s.name for s in parsed]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate schemes in {self.schemes!r}")

        if self.sweep_name:
            if self.sweep_name not in SWEEP_TYPES:
                raise ConfigError(f"unknown sweep axis {self.sweep_name!r}")
            if not self.sweep_values:
                raise ConfigError("sweep values must be nonempty")
        elif self.sweep_values:
            raise ConfigError("sweep values given without a sweep axis")

        if self.sweep_name == "delta":
            if self.csi != "imperfect":
                raise ConfigError("sweeping delta requires csi=imperfect")
            if self.deltas:
                raise ConfigError("give deltas through the sweep or the delta "
                                  "list, not both")
            if any(v < 0 for v in self.sweep_values):
                raise ConfigError("delta values must be nonnegative")
        elif self.csi == "imperfect":
            if len(self.deltas) != 1:
                raise ConfigError("csi=imperfect needs exactly one delta "
                                  "(several deltas form a delta sweep)")
            if self.deltas[0] < 0:
                raise ConfigError("delta must be nonnegative")
        elif self.deltas:
            raise ConfigError("delta given but csi=perfect")

        # every swept config must be constructible, and every grouped scheme
        # must tile its element count
        cfgs = [self.cfg]
        if self.sweep_name:
            cfgs = [_apply_sweep(self.cfg, self.sweep_name, v)
                    for v in self.sweep_values]
        for sch in parsed:
            if sch.groups is None:
                continue
            for c in cfgs:
                if c.m % sch.groups != 0:
                    raise ConfigError(f"scheme {sch.token!r}: {sch.groups} "
                                      f"groups do not divide m={c.m}")


def trial_channels(cfg: SystemConfig, seed: int, trial: int) -> ChannelSet:
    """The channel realization every scheme shares at this trial index."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, trial)))
    return draw_channels(cfg, rng)


@dataclass(frozen=True)
class _WorkItem:
    cfg: SystemConfig
    scheme: _Scheme
    sweep_name: str
    sweep_value: object
    trial: int
    seed: int
    csi: str
    delta: float
    multistart: int
    params: SolverParams


@dataclass(frozen=True)
class _CellSolution:
    sr: float
    rb: float
    re: float
    outer_iters: int
    final_eta: float
    unit_res: float
    termination: str


def _rates(w, theta, cs, cfg, cee):
    if cee is None:
        return capacities(w, theta, cs, cfg)
    return capacities_imcsi(w, theta, cs, cfg, cee)


# single-stage solves have no outer loop; translate the engine's stop reason
_SINGLE_STAGE_TERMINATION = {"grad_tol": "converged", "max_inner": "budget"}

_NAN = float("nan")


def _solve_one(item: _WorkItem, cs: ChannelSet, cee, rng, theta_random) -> _CellSolution:
    cfg = item.cfg
    kind = item.scheme.kind
    if cfg.m == 0 or kind == "wo":
        # no reconfigurable elements (or none used): beamformer-only problem
        w, trace = _solve_fixed_theta(cs, cfg, None, item.params, rng=rng,
                                      eve_active=(kind != "upper"))
        theta_eval = np.zeros((cfg.m, cfg.m), dtype=complex)
        rb, re = _rates(w, theta_eval, cs, cfg, cee)
        if kind == "upper":
            re = 0.0
        term = _SINGLE_STAGE_TERMINATION.get(trace.termination, trace.termination)
        return _CellSolution(max(0.0, rb - re), rb, re, trace.n_outer, _NAN,
                             _NAN, term)

    if kind in ("fc", "gc", "upper"):
        mode = "imperfect" if cee is not None else "perfect"
        w, theta, trace = pprcgd(cs, cfg, item.params, mode=mode,
                                 delta=item.delta, groups=item.scheme.groups,
                                 eve_active=(kind != "upper"), rng=rng)
        rb, re = _rates(w, theta, cs, cfg, cee)
        if kind == "upper":
            re = 0.0
        return _CellSolution(max(0.0, rb - re), rb, re, trace.n_outer,
                             trace.final_eta(), unitarity_residual(theta),
                             trace.termination)

    if kind == "dris":
        w, th, trace = _solve_dris(cs, cfg, item.params, delta=item.delta,
                                   rng=rng)
        theta_eval = np.diag(th)
        rb, re = _rates(w, theta_eval, cs, cfg, cee)
        term = _SINGLE_STAGE_TERMINATION.get(trace.termination, trace.termination)
        return _CellSolution(max(0.0, rb - re), rb, re, trace.n_outer, _NAN,
                             unitarity_residual(theta_eval), term)

    if kind == "random":
        w, trace = _solve_fixed_theta(cs, cfg, theta_random, item.params, rng=rng)
        rb, re = _rates(w, theta_random, cs, cfg, cee)
        term = _SINGLE_STAGE_TERMINATION.get(trace.termination, trace.termination)
        return _CellSolution(max(0.0, rb - re), rb, re, trace.n_outer, _NAN,
                             unitarity_residual(theta_random), term)

    raise ValueError(f"unhandled scheme kind {kind!r}")


def _run_cell(item: _WorkItem) -> TrialResult:
    t0 = time.perf_counter()
    cs = trial_channels(item.cfg, item.seed, item.trial)
    cee = cee_variances(item.cfg, cs, item.delta) if item.csi == "imperfect" else None
    theta_random = None
    if item.scheme.kind == "random" and item.cfg.m > 0:
        # the scheme's random scattering matrix: per-trial, not per-start
        trng = np.random.default_rng(
            np.random.SeedSequence(item.seed, spawn_key=(2, item.trial)))
        theta_random = random_symmetric_unitary(item.cfg.m, trng)
    best = None
    for k in range(item.multistart):
        rng = np.random.default_rng(np.random.SeedSequence(
            item.seed, spawn_key=(1, item.trial, k, item.scheme.code)))
        sol = _solve_one(item, cs, cee, rng, theta_random)
        if best is None or sol.sr > best.sr:
            best = sol
    return TrialResult(
        scheme=item.scheme.name, sweep_name=item.sweep_name,
        sweep_value=item.sweep_value, trial=item.trial, seed=item.seed,
        sr_bps_hz=best.sr, rb_bps_hz=best.rb, re_bps_hz=best.re,
        wall_s=time.perf_counter() - t0, outer_iters=best.outer_iters,
        final_eta=best.final_eta, unitarity_residual=best.unit_res,
        termination=best.termination)


def run_experiment(spec: ExperimentSpec) -> list[TrialResult]:
    """All (sweep value, scheme, trial) cells, in deterministic row order."""
    schemes = [_parse_scheme(t) for t in spec.schemes]
    cells = [("", "")]
    if spec.sweep_name:
        cells = [(spec.sweep_name, v) for v in spec.sweep_values]
    items = []
    for sweep_name, value in cells:
        cfg = spec.cfg if not sweep_name else _apply_sweep(spec.cfg, sweep_name, value)
        if sweep_name == "delta":
            delta = float(value)
        elif spec.csi == "imperfect":
            delta = float(spec.deltas[0])
        else:
            delta = 0.0
        for sch in schemes:
            for t in range(spec.trials):
                items.append(_WorkItem(
                    cfg=cfg, scheme=sch, sweep_name=sweep_name,
                    sweep_value=value, trial=t, seed=spec.seed, csi=spec.csi,
                    delta=delta, multistart=spec.multistart, params=spec.solver))
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            return list(pool.map(_run_cell, items))
    return [_run_cell(item) for item in items]


def compute_rmse(values) -> float:
    """Population root-mean-square deviation about the sample mean."""
    vals = np.asarray(list(values), dtype=float)
    if vals.size < 2:
        raise ValueError("need at least two values")
    return float(np.sqrt(np.mean((vals - vals.mean()) ** 2)))


def summarize(rows) -> dict:
    """Mean secrecy rate keyed by (scheme, sweep_value), in row order."""
    acc: dict = {}
    for r in rows:
        acc.setdefault((r.scheme, r.sweep_value), []).append(r.sr_bps_hz)
    return {key: float(np.mean(v)) for key, v in acc.items()}


# -- result files ------------------------------------------------------------

_INT_COLUMNS = frozenset({"trial", "seed", "outer_iters"})
_FLOAT_COLUMNS = frozenset({"sr_bps_hz", "rb_bps_hz", "re_bps_hz", "wall_s",
                            "final_eta", "unitarity_residual"})


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_cell(v):
    if isinstance(v, float) and not np.isfinite(v):
        return None
    return v


def write_results(table, path, fmt: str = "csv") -> None:
    """Write rows with the fixed column set; floats keep full precision.

    CSV uses LF line endings; JSON is an array of row objects with identical
    keys, with non-finite floats written as null.
    """
    rows = list(table)
    if not rows:
        raise ValueError("refusing to write an empty result table")
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(COLUMNS) + "\n")
            for r in rows:
                fh.write(",".join(_csv_cell(getattr(r, c)) for c in COLUMNS) + "\n")
    elif fmt == "json":
        doc = [{c: _json_cell(getattr(r, c)) for c in COLUMNS} for r in rows]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            json.dump(doc, fh, indent=1, allow_nan=False)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _parse_sweep_value(s: str):
    if s == "":
        return ""
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def _row_from_mapping(d: dict) -> TrialResult:
    missing = [c for c in COLUMNS if c not in d]
    if missing:
        raise ValueError(f"result row missing columns {missing}")
    kw = {}
    for c in COLUMNS:
        v = d[c]
        if c in _INT_COLUMNS:
            kw[c] = int(v)
        elif c in _FLOAT_COLUMNS:
            kw[c] = _NAN if v is None else float(v)
        elif c == "sweep_value":
            kw[c] = _parse_sweep_value(v) if isinstance(v, str) else v
        else:
            kw[c] = str(v)
    return TrialResult(**kw)


def read_results(path) -> list[TrialResult]:
    """Parse a results file written by write_results (either format)."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        return [_row_from_mapping(d) for d in json.loads(text)]
    reader = DictReader(io.StringIO(text))
    return [_row_from_mapping(d) for d in reader]


# -- configuration parsing ---------------------------------------------------

def _from_db(x: float) -> float:
    return 10.0 ** (x / 10.0)


def _from_dbm(x: float) -> float:
    return 10.0 ** ((x - 30.0) / 10.0)


# accepted decibel spellings -> (plain key, conversion to SI)
_DB_KEYS = {
    "p_db": ("p", _from_db),
    "p_dbm": ("p", _from_dbm),
    "sigma_b2_db": ("sigma_b2", _from_db),
    "sigma_b2_dbm": ("sigma_b2", _from_dbm),
    "sigma_e2_db": ("sigma_e2", _from_db),
    "sigma_e2_dbm": ("sigma_e2", _from_dbm),
    "c0_db": ("c0", _from_db),
    "kappa_db": ("kappa", _from_db),
}

_SYSTEM_INT_KEYS = frozenset({"n_t", "n_b", "n_e", "n_s", "m", "g"})
_SYSTEM_FLOAT_KEYS = frozenset({"p", "sigma_b2", "sigma_e2", "zeta_ai",
                                "zeta_ib", "zeta_ie", "zeta_ab", "zeta_ae",
                                "c0", "d0", "kappa"})
_SYSTEM_POS_KEYS = frozenset({"pos_alice", "pos_ris", "pos_bob", "pos_eve"})


def _as_int(key: str, v) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    if isinstance(v, float):
        if not v.is_integer():
            raise ConfigError(f"{key} must be an integer, got {v!r}")
        v = int(v)
    return v


def _as_float(key: str, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    return float(v)


def _as_position(key: str, v) -> tuple:
    if (not isinstance(v, (list, tuple)) or len(v) != 2
            or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in v)):
        raise ConfigError(f"{key} must be a 2-element [x, y] position, got {v!r}")
    return (float(v[0]), float(v[1]))


def _as_scheme_list(v) -> tuple:
    if isinstance(v, str):
        v = [s for s in v.split(",") if s]
    if not isinstance(v, (list, tuple)) or not all(isinstance(s, str) for s in v):
        raise ConfigError(f"schemes must be a list of tokens, got {v!r}")
    return tuple(v)


def _as_delta_list(v) -> tuple:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return (float(v),)
    if isinstance(v, (list, tuple)):
        return tuple(_as_float("delta", x) for x in v)
    raise ConfigError(f"delta must be a number or a list, got {v!r}")


def _parse_solver(v) -> SolverParams:
    if not isinstance(v, dict):
        raise ConfigError(f"solver must be an object, got {v!r}")
    known = {f.name for f in dataclass_fields(SolverParams)}
    kw = {}
    for key, val in v.items():
        if key not in known:
            raise ConfigError(f"unknown config key solver.{key!r}")
        if key.startswith("max_"):
            kw[key] = _as_int(f"solver.{key}", val)
        else:
            kw[key] = _as_float(f"solver.{key}", val)
    try:
        return SolverParams(**kw)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc


def _parse_sweep_obj(v):
    if not isinstance(v, dict):
        raise ConfigError(f"sweep must be an object with name and values, got {v!r}")
    unknown = set(v) - {"name", "values"}
    if unknown:
        raise ConfigError(f"unknown config key sweep.{sorted(unknown)[0]!r}")
    if "name" not in v or "values" not in v:
        raise ConfigError("sweep needs both name and values")
    name = v["name"]
    if name not in SWEEP_TYPES:
        raise ConfigError(f"unknown sweep axis {name!r}")
    vals = v["values"]
    if not isinstance(vals, (list, tuple)) or not vals:
        raise ConfigError("sweep.values must be a nonempty list")
    typ = SWEEP_TYPES[name]
    conv = _as_int if typ is int else _as_float
    return name, tuple(conv(f"sweep.{name}", x) for x in vals)


def parse_sweep_arg(arg: str):
    """Parse a command-line sweep of the form name=v1,v2,..."""
    name, sep, rest = arg.partition("=")
    if not sep or not rest:
        raise ConfigError(f"sweep must look like name=v1,v2,..., got {arg!r}")
    name = name.strip()
    if name not in SWEEP_TYPES:
        raise ConfigError(f"unknown sweep axis {name!r}")
    typ = SWEEP_TYPES[name]
    values = []
    for tok in rest.split(","):
        tok = tok.strip()
        try:
            values.append(typ(tok))
        except ValueError as exc:
            raise ConfigError(f"sweep {name}: bad value {tok!r}") from exc
    return name, tuple(values)


def _config_kwargs(doc) -> dict:
    """Raw spec keyword arguments from a config document; strict on keys."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    sys_kwargs: dict = {}
    db_sources: dict = {}
    kw: dict = {}
    for key, val in doc.items():
        if key in _SYSTEM_INT_KEYS:
            sys_kwargs[key] = _as_int(key, val)
        elif key in _SYSTEM_FLOAT_KEYS:
            sys_kwargs[key] = _as_float(key, val)
        elif key in _SYSTEM_POS_KEYS:
            sys_kwargs[key] = _as_position(key, val)
        elif key in _DB_KEYS:
            target, conv = _DB_KEYS[key]
            db_sources.setdefault(target, []).append(key)
            sys_kwargs[target] = conv(_as_float(key, val))
        elif key == "schemes":
            kw["schemes"] = _as_scheme_list(val)
        elif key == "sweep":
            kw["sweep_name"], kw["sweep_values"] = _parse_sweep_obj(val)
        elif key in ("trials", "seed", "multistart", "jobs"):
            kw[key] = _as_int(key, val)
        elif key == "csi":
            if val not in ("perfect", "imperfect"):
                raise ConfigError(f"csi must be perfect or imperfect, got {val!r}")
            kw["csi"] = val
        elif key == "delta":
            kw["deltas"] = _as_delta_list(val)
        elif key == "out":
            if not isinstance(val, str) or not val:
                raise ConfigError(f"out must be a nonempty path, got {val!r}")
            kw["out"] = val
        elif key == "format":
            kw["fmt"] = val
        elif key == "solver":
            kw["solver"] = _parse_solver(val)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    for target, sources in db_sources.items():
        if target in doc:
            raise ConfigError(f"give either {target!r} or {sources[0]!r}, not both")
        if len(sources) > 1:
            raise ConfigError(f"conflicting keys {sources[0]!r} and {sources[1]!r}")
    try:
        kw["cfg"] = default_config(**sys_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return kw


def build_spec(cfg=None, schemes=("fc",), sweep_name="", sweep_values=(),
               trials=50, seed=1, csi=None, deltas=(), multistart=1, out=None,
               fmt="csv", jobs=1, solver=None) -> ExperimentSpec:
    """Assemble a validated spec; a multi-value delta list becomes a sweep."""
    if cfg is None:
        cfg = default_config()
    if solver is None:
        solver = SolverParams()
    if csi is None:
        csi = "imperfect" if (deltas or sweep_name == "delta") else "perfect"
    if csi == "imperfect" and len(deltas) > 1:
        if sweep_name:
            raise ConfigError("give a single delta when another sweep is active")
        sweep_name, sweep_values, deltas = "delta", tuple(deltas), ()
    return ExperimentSpec(cfg=cfg, schemes=tuple(schemes), sweep_name=sweep_name,
                          sweep_values=tuple(sweep_values), trials=trials,
                          seed=seed, csi=csi, deltas=tuple(deltas),
                          multistart=multistart, out=out, fmt=fmt, jobs=jobs,
                          solver=solver)


def parse_config(doc) -> ExperimentSpec:
    """Validated spec straight from a config document."""
    return build_spec(**_config_kwargs(doc))

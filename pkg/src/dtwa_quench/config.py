"""Experiment configuration: JSON loading, strict validation, resolution.

Configs are flat JSON objects. Validation is strict: unknown keys are
rejected by name, types are checked, and every failure raises
ConfigError carrying a machine-readable record. All times in configs are
dimensionless tJ; resolution converts to physical time using J.

The three run subcommands (dtwa, oracle-ising, oracle-ed) share one
schema so a single config can drive an engine run and its oracle
comparison; Monte-Carlo-only keys (n_t, master_seed, integrator) are
accepted and ignored by the oracle runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Any

import numpy as np

from . import lattice as lat
from .dtwa import CorrelationRequest, IntegratorControl, RunConfig

__all__ = [
    "ConfigError",
    "ResolvedRun",
    "load_json",
    "resolve_run_config",
    "resolve_analysis_options",
    "AnalysisOptions",
]

_MAX_SEED = 2**64 - 1


class ConfigError(Exception):
    """Configuration rejected; key identifies the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key

    def record(self) -> dict:
        rec = {"type": "config", "message": str(self)}
        if self.key is not None:
            rec["key"] = self.key
        return rec


def load_json(path) -> dict:
    try:
        with open(path) as f:
            cfg = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


class _Section:
    """Tracks consumed keys so leftovers can be rejected by name."""

    def __init__(self, data: dict, path: str = ""):
        if not isinstance(data, dict):
            raise ConfigError(f"{path or 'config'} must be an object", key=path)
        self.data = data
        self.path = path
        self.seen: set[str] = set()

    def _key(self, name: str) -> str:
        return f"{self.path}.{name}" if self.path else name

    def take(self, name: str, kind, required=False, default=None):
        self.seen.add(name)
        if name not in self.data:
            if required:
                raise ConfigError(
                    f"missing required key {self._key(name)!r}", key=self._key(name)
                )
            return default
        value = self.data[name]
        return _check_type(value, kind, self._key(name))

    def section(self, name: str, required=False) -> "_Section | None":
        self.seen.add(name)
        if name not in self.data:
            if required:
                raise ConfigError(
                    f"missing required key {self._key(name)!r}", key=self._key(name)
                )
            return None
        return _Section(self.data[name], self._key(name))

    def finish(self) -> None:
        unknown = sorted(set(self.data) - self.seen)
        if unknown:
            key = self._key(unknown[0])
            raise ConfigError(f"unknown config key {key!r}", key=key)


def _check_type(value, kind, key):
    if kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key!r} must be a number", key=key)
        if not math.isfinite(value):
            raise ConfigError(f"{key!r} must be finite", key=key)
        return float(value)
    if kind == "integer":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key!r} must be an integer", key=key)
        return value
    if kind == "string":
        if not isinstance(value, str):
            raise ConfigError(f"{key!r} must be a string", key=key)
        return value
    if kind == "boolean":
        if not isinstance(value, bool):
            raise ConfigError(f"{key!r} must be a boolean", key=key)
        return value
    if kind == "array":
        if not isinstance(value, list):
            raise ConfigError(f"{key!r} must be an array", key=key)
        return value
    if kind == "any":
        return value
    raise AssertionError(kind)


def _positive_int(section: _Section, name: str, required=False, default=None):
    v = section.take(name, "integer", required=required, default=default)
    if v is not None and v < 1:
        raise ConfigError(
            f"{section._key(name)!r} must be >= 1", key=section._key(name)
        )
    return v


@dataclass
class AnalysisOptions:
    thresholds: tuple[float, ...] = (0.05,)
    j_min: int | None = None  # None: 2 for 2D lattices, 1 for chains
    bootstrap_resamples: int = 200
    bootstrap_seed: int = 0


@dataclass
class ResolvedRun:
    """A validated run config with concrete engine inputs."""

    model: str
    lattice: lat.LatticeSpec
    alpha: float
    J: float
    couplings: lat.CouplingMatrix
    times_tj: np.ndarray  # times as tJ, what files report
    run: RunConfig  # physical times inside
    reference: int | None
    partners: tuple[int, ...]
    components: tuple[str, ...]
    collective_x: bool
    ed_tol: float
    ed_m_max: int
    analysis: AnalysisOptions
    note: str | None
    export_couplings: bool
    output_dir: str | None = None
    raw: dict = dc_field(repr=False, default_factory=dict)

    def j_min_default(self) -> int:
        return 1 if min(self.lattice.nx, self.lattice.ny) == 1 else 2


def _resolve_times(section: _Section, name: str) -> np.ndarray:
    raw = section.take(name, "any", required=True)
    key = section._key(name)
    if isinstance(raw, list):
        if not raw or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw
        ):
            raise ConfigError(f"{key!r} must be a non-empty array of numbers", key=key)
        times = np.asarray(raw, dtype=np.float64)
    elif isinstance(raw, dict):
        sub = _Section(raw, key)
        stop = sub.take("stop", "number", required=True)
        step = sub.take("step", "number")
        num = sub.take("num", "integer")
        sub.finish()
        if (step is None) == (num is None):
            raise ConfigError(
                f"{key!r} needs exactly one of 'step' or 'num'", key=key
            )
        if stop <= 0:
            raise ConfigError(f"{key}.stop must be > 0", key=f"{key}.stop")
        if step is not None:
            if step <= 0:
                raise ConfigError(f"{key}.step must be > 0", key=f"{key}.step")
            n = int(round(stop / step))
            if abs(n * step - stop) > 1e-9 * max(1.0, stop):
                raise ConfigError(
                    f"{key}.stop must be an integer multiple of step",
                    key=f"{key}.stop",
                )
            times = np.linspace(0.0, stop, n + 1)
        else:
            if num < 2:
                raise ConfigError(f"{key}.num must be >= 2", key=f"{key}.num")
            times = np.linspace(0.0, stop, num)
    else:
        raise ConfigError(f"{key!r} must be an array or an object", key=key)
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ConfigError(
            f"{key!r} must be strictly increasing and >= 0", key=key
        )
    return times


def _resolve_reference(spec, lattice: lat.LatticeSpec, key: str) -> int:
    if spec == "center" or spec is None:
        return lat.center_site(lattice)
    if spec == "corner":
        return lat.site_index(lattice, 1, 1)
    if (
        isinstance(spec, list)
        and len(spec) == 2
        and all(isinstance(v, int) and not isinstance(v, bool) for v in spec)
    ):
        try:
            return lat.site_index(lattice, spec[0], spec[1])
        except ValueError as e:
            raise ConfigError(str(e), key=key)
    raise ConfigError(
        f"{key!r} must be 'center', 'corner', or a [n_x, n_y] pair", key=key
    )


def resolve_analysis_options(section: _Section | None) -> AnalysisOptions:
    if section is None:
        return AnalysisOptions()
    raw_thr = section.take("thresholds", "any", default=[0.05])
    key = section._key("thresholds")
    if isinstance(raw_thr, (int, float)) and not isinstance(raw_thr, bool):
        raw_thr = [raw_thr]
    if not isinstance(raw_thr, list) or not raw_thr or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0
        for v in raw_thr
    ):
        raise ConfigError(
            f"{key!r} must be a positive number or array of them", key=key
        )
    j_min = _positive_int(section, "j_min")
    resamples = _positive_int(section, "bootstrap_resamples", default=200)
    seed = section.take("bootstrap_seed", "integer", default=0)
    section.finish()
    return AnalysisOptions(
        thresholds=tuple(float(v) for v in raw_thr),
        j_min=j_min,
        bootstrap_resamples=resamples,
        bootstrap_seed=seed,
    )


def resolve_run_config(
    cfg: dict,
    subcommand: str,
    seed_override: int | None = None,
    require_alpha: bool = True,
) -> ResolvedRun:
    """Validate and resolve a run config for dtwa / oracle-ising / oracle-ed."""
    root = _Section(dict(cfg))
    model = root.take("model", "string", required=True)
    if model not in ("ising", "xy"):
        raise ConfigError(
            f"'model' must be 'ising' or 'xy', got {model!r}", key="model"
        )
    if subcommand == "oracle-ising" and model != "ising":
        raise ConfigError(
            "the closed-form oracle only covers the ising model", key="model"
        )

    lat_sec = root.section("lattice", required=True)
    nx = _positive_int(lat_sec, "nx", required=True)
    ny = _positive_int(lat_sec, "ny", required=True)
    lat_sec.finish()
    try:
        lattice = lat.build_lattice(nx, ny)
    except ValueError as e:
        raise ConfigError(str(e), key="lattice")

    alpha = root.take("alpha", "number", required=require_alpha)
    if alpha is not None and alpha < 0:
        raise ConfigError("'alpha' must be >= 0", key="alpha")
    J = root.take("J", "number", default=1.0)
    if J <= 0:
        raise ConfigError("'J' must be > 0", key="J")

    protocol = root.take("protocol", "string", default="plus_x_quench")
    if protocol != "plus_x_quench":
        raise ConfigError(
            f"'protocol' must be 'plus_x_quench', got {protocol!r}", key="protocol"
        )

    times_tj = _resolve_times(root, "sample_times")

    mc_required = subcommand in ("dtwa", "crossover")
    n_t = _positive_int(root, "n_t", required=mc_required, default=1)
    master_seed = root.take(
        "master_seed", "integer", required=mc_required, default=0
    )
    if seed_override is not None:
        master_seed = seed_override
    if not (0 <= master_seed <= _MAX_SEED):
        raise ConfigError(
            "'master_seed' must fit in an unsigned 64-bit integer",
            key="master_seed",
        )

    integ_sec = root.section("integrator")
    step_tj = None
    if integ_sec is not None:
        step_tj = integ_sec.take("step", "number")
        if step_tj is not None and step_tj <= 0:
            raise ConfigError("'integrator.step' must be > 0", key="integrator.step")
        integ_sec.finish()

    collective_x = True
    reference = None
    partners: tuple[int, ...] = ()
    components: tuple[str, ...] = ()
    obs_sec = root.section("observables")
    if obs_sec is not None:
        collective_x = obs_sec.take("collective_x", "boolean", default=True)
        corr_sec = obs_sec.section("correlations")
        if corr_sec is not None:
            ref_raw = corr_sec.take("reference", "any", default="center")
            axis = corr_sec.take("axis", "string", default="y")
            comp_raw = corr_sec.take("components", "array", default=["yy"])
            j_max = _positive_int(corr_sec, "j_max")
            corr_sec.finish()
            if axis not in ("x", "y"):
                raise ConfigError(
                    f"correlation axis must be 'x' or 'y', got {axis!r}",
                    key="observables.correlations.axis",
                )
            allowed = ("xx", "yy", "zz", "pp", "pm")
            if not comp_raw or not all(c in allowed for c in comp_raw):
                raise ConfigError(
                    f"correlation components must be among {allowed}",
                    key="observables.correlations.components",
                )
            reference = _resolve_reference(
                ref_raw, lattice, "observables.correlations.reference"
            )
            try:
                partners = lat.axis_partners(lattice, reference, axis, j_max)
            except ValueError as e:
                raise ConfigError(str(e), key="observables.correlations")
            components = tuple(dict.fromkeys(comp_raw))
        obs_sec.finish()

    ed_tol = 1e-11
    ed_m_max = 30
    ed_sec = root.section("ed")
    if ed_sec is not None:
        ed_tol = ed_sec.take("tol", "number", default=1e-11)
        ed_m_max = _positive_int(ed_sec, "m_max", default=30)
        if ed_tol <= 0:
            raise ConfigError("'ed.tol' must be > 0", key="ed.tol")
        ed_sec.finish()

    analysis = resolve_analysis_options(root.section("analysis"))
    note = root.take("note", "string")
    export_couplings = root.take("export_couplings", "boolean", default=False)
    output_dir = root.take("output_dir", "string")
    root.finish()

    axis = "" if reference is None else axis
    corr = None
    if reference is not None:
        corr = CorrelationRequest(
            reference=reference,
            axis=axis,
            partners=tuple(partners),
            components=components,
        )
    control = IntegratorControl(step=None if step_tj is None else step_tj / J)
    run = RunConfig(
        n_t=n_t,
        master_seed=master_seed,
        sample_times=times_tj / J,
        integrator=control,
        collective_x=collective_x,
        correlations=corr,
    )
    couplings = None
    if alpha is not None:
        couplings = lat.coupling_matrix(lattice, model, J=J, alpha=alpha)
    return ResolvedRun(
        model=model,
        lattice=lattice,
        alpha=alpha if alpha is None else float(alpha),
        J=J,
        couplings=couplings,
        times_tj=times_tj,
        run=run,
        reference=reference,
        partners=tuple(partners),
        components=components,
        collective_x=collective_x,
        ed_tol=ed_tol,
        ed_m_max=ed_m_max,
        analysis=analysis,
        note=note,
        export_couplings=export_couplings,
        output_dir=output_dir,
        raw=dict(cfg),
    )

"""Strict JSON experiment configuration.

Every key is checked against a fixed schema, unknown keys are rejected
with a close-match suggestion, and all defaults are written into the
returned :class:`RunConfig` so a run never depends on implicit state.
"""
from __future__ import annotations

import difflib
import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigError, ParameterError
from .model import DimensionlessParams, PhysicalParams, scale_params

ENGINES = ("classical-hard", "classical-soft", "quantum", "standard-map")
FIGURES = ("fig1", "fig2", "fig3", "fig4")

# initial data: narrow packet on an accelerating orbit for the classical
# engines, broad minimum-uncertainty packet for the quantum engine
CLASSICAL_ENSEMBLE = {"n": 10_000, "z_mean": 0.0, "p_mean": 2.0 * math.pi ** 2,
                      "z_std": 0.1, "p_std": 0.1}
QUANTUM_ENSEMBLE = {"n": 10_000, "z_mean": 5.0, "p_mean": 0.0, "z_std": 1.0, "p_std": 0.5}
MODEL_DEFAULTS = {"kbar": 1.0, "v0": 1.0, "kappa": 4.0}

_NUMBER = "number"
_INT = "integer"
_STR = "string"
_BOOL = "boolean"

# key -> type name or nested schema
_SCHEMA: dict[str, Any] = {
    "engine": _STR,
    "lambda": "lambda",
    "t_final": _NUMBER,
    "seed": _INT,
    "n_samples": _INT,
    "workers": _INT,
    "output_dir": _STR,
    "figure": _STR,
    "ensemble": {"n": _INT, "z_mean": _NUMBER, "p_mean": _NUMBER,
                 "z_std": _NUMBER, "p_std": _NUMBER},
    "quantum": {"kbar": _NUMBER, "v0": _NUMBER, "kappa": _NUMBER, "dt": _NUMBER,
                "sample_stride": _INT,
                "grid": {"z_min": _NUMBER, "z_max": _NUMBER, "n_points": _INT},
                "absorber": {"frac": _NUMBER, "on": _BOOL}},
    "classical": {"dt": _NUMBER, "hist_bins": _INT},
    "standard_map": {"n_particles": _INT, "n_steps": _INT},
    "physical": {"mass": _NUMBER, "gravity": _NUMBER, "omega": _NUMBER,
                 "decay_k": _NUMBER, "rabi_eff": _NUMBER, "epsilon": _NUMBER},
}


@dataclass(frozen=True)
class EnsembleConfig:
    n: int
    z_mean: float
    p_mean: float
    z_std: float
    p_std: float


@dataclass(frozen=True)
class GridConfig:
    z_min: float
    z_max: float
    n_points: int


@dataclass(frozen=True)
class QuantumConfig:
    kbar: float = 1.0
    v0: float = 1.0
    kappa: float = 4.0
    dt: float = 2e-3
    sample_stride: int = 250
    grid: Optional[GridConfig] = None
    absorber_frac: float = 0.05
    absorber_on: bool = True


@dataclass(frozen=True)
class RunConfig:
    """Fully materialized run description."""

    engine: str
    lambdas: tuple
    lambda_spec: Any
    t_final: float
    seed: int
    n_samples: int
    workers: int
    output_dir: str
    ensemble: EnsembleConfig
    quantum: QuantumConfig
    classical_dt: Optional[float] = None
    hist_bins: Optional[int] = None
    sm_particles: int = 100_000
    sm_steps: int = 500
    figure: Optional[str] = None
    physical: Optional[PhysicalParams] = None
    derived: dict = field(default_factory=dict, compare=False)

    def params(self, lam: float) -> DimensionlessParams:
        q = self.quantum
        return DimensionlessParams(lam, q.kappa, q.v0, q.kbar)

    def to_dict(self) -> dict:
        """Materialized JSON form; parsing it gives back an equal config."""
        q = self.quantum
        out = {
            "engine": self.engine,
            "lambda": self.lambda_spec,
            "t_final": self.t_final,
            "seed": self.seed,
            "n_samples": self.n_samples,
            "workers": self.workers,
            "output_dir": self.output_dir,
            "ensemble": asdict(self.ensemble),
            "quantum": {"kbar": q.kbar, "v0": q.v0, "kappa": q.kappa, "dt": q.dt,
                        "sample_stride": q.sample_stride,
                        "absorber": {"frac": q.absorber_frac, "on": q.absorber_on}},
            "classical": {},
            "standard_map": {"n_particles": self.sm_particles, "n_steps": self.sm_steps},
        }
        if q.grid is not None:
            out["quantum"]["grid"] = asdict(q.grid)
        if self.classical_dt is not None:
            out["classical"]["dt"] = self.classical_dt
        if self.hist_bins is not None:
            out["classical"]["hist_bins"] = self.hist_bins
        if self.figure is not None:
            out["figure"] = self.figure
        if self.physical is not None:
            out["physical"] = self.physical.to_dict()
        return out


def _locate(text: Optional[str], path: tuple) -> Optional[int]:
    """Best-effort line number of the key at ``path`` in the source text."""
    if not text or not path:
        return None
    pos = 0
    for key in path:
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            return None
        pos = m.start()
    return text.count("\n", 0, pos) + 1


class _Checker:
    def __init__(self, text: Optional[str]):
        self.text = text

    def fail(self, path: tuple, msg: str):
        name = ".".join(str(p) for p in path) or "<root>"
        line = _locate(self.text, path)
        where = f" (line {line})" if line else ""
        raise ConfigError(f"{name}{where}: {msg}", key=name, line=line)

    def check(self, obj: Any, schema: dict, path: tuple = ()):
        if not isinstance(obj, dict):
            self.fail(path, f"expected object, got {type(obj).__name__}")
        for key, value in obj.items():
            if key not in schema:
                close = difflib.get_close_matches(key, list(schema), n=1, cutoff=0.6)
                hint = f"; did you mean {close[0]!r}?" if close else ""
                self.fail(path + (key,), f"unknown key{hint}")
            kind = schema[key]
            if isinstance(kind, dict):
                self.check(value, kind, path + (key,))
            else:
                self.check_value(value, kind, path + (key,))

    def check_value(self, value: Any, kind: str, path: tuple):
        if kind == _NUMBER:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                self.fail(path, f"expected number, got {_json_type(value)}")
            if not math.isfinite(value):
                self.fail(path, "expected a finite number")
        elif kind == _INT:
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail(path, f"expected integer, got {_json_type(value)}")
        elif kind == _STR:
            if not isinstance(value, str):
                self.fail(path, f"expected string, got {_json_type(value)}")
        elif kind == _BOOL:
            if not isinstance(value, bool):
                self.fail(path, f"expected boolean, got {_json_type(value)}")
        elif kind == "lambda":
            if isinstance(value, dict):
                self.check(value, {"start": _NUMBER, "stop": _NUMBER, "count": _INT}, path)
                missing = [k for k in ("start", "stop", "count") if k not in value]
                if missing:
                    self.fail(path, f"range needs keys start, stop, count; missing {missing}")
            elif isinstance(value, list):
                for i, v in enumerate(value):
                    if isinstance(v, bool) or not isinstance(v, (int, float)):
                        self.fail(path, f"expected number at index {i}, got {_json_type(v)}")
            else:
                self.check_value(value, _NUMBER, path)


def _json_type(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "array"
    return "object"


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ConfigError(f"{k}: duplicate key", key=k)
        out[k] = v
    return out


def expand_lambdas(spec: Any) -> tuple:
    if isinstance(spec, dict):
        n = int(spec["count"])
        if n < 1:
            return ()
        a, b = float(spec["start"]), float(spec["stop"])
        if n == 1:
            return (a,)
        # endpoints exact, interior by linear interpolation
        return tuple(a + (b - a) * i / (n - 1) if 0 < i < n - 1 else (a if i == 0 else b)
                     for i in range(n))
    if isinstance(spec, list):
        return tuple(float(x) for x in spec)
    return (float(spec),)


def parse_config_text(text: str, base_dir: Optional[Path] = None) -> RunConfig:
    try:
        raw = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}: {exc.msg}", line=exc.lineno) from None
    return build_config(raw, text=text, base_dir=base_dir)


def parse_config(path) -> RunConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), base_dir=path.parent)


def build_config(raw: dict, text: Optional[str] = None,
                 base_dir: Optional[Path] = None) -> RunConfig:
    chk = _Checker(text)
    chk.check(raw, _SCHEMA)

    engine = raw.get("engine")
    if engine is None:
        chk.fail(("engine",), f"required key missing; one of {', '.join(ENGINES)}")
    if engine not in ENGINES:
        close = difflib.get_close_matches(engine, ENGINES, n=1)
        hint = f"; did you mean {close[0]!r}?" if close else ""
        chk.fail(("engine",), f"expected one of {', '.join(ENGINES)}{hint}")

    derived: dict = {}
    physical = None
    phys_dimless = None
    if "physical" in raw:
        missing = [k for k in _SCHEMA["physical"] if k not in raw["physical"]]
        if missing:
            chk.fail(("physical",), f"missing keys {missing}")
        try:
            physical = PhysicalParams(**{k: float(v) for k, v in raw["physical"].items()})
            phys_dimless = scale_params(physical)
        except ParameterError as exc:
            chk.fail(("physical",), str(exc))
        derived["physical_scaling"] = phys_dimless.to_dict()

    # explicit lambda wins over the value implied by physical units
    if "lambda" in raw:
        lambda_spec = raw["lambda"]
    elif phys_dimless is not None:
        lambda_spec = phys_dimless.lam
    else:
        chk.fail(("lambda",), "required key missing (or give 'physical')")
    lambdas = expand_lambdas(lambda_spec)
    if not lambdas:
        chk.fail(("lambda",), "lambda range is empty")
    if any(x < 0 for x in lambdas):
        chk.fail(("lambda",), "lambda must be >= 0")
    if len(set(lambdas)) != len(lambdas):
        chk.fail(("lambda",), "lambda values must be distinct")

    if "t_final" in raw:
        t_final = float(raw["t_final"])
    elif engine == "standard-map":
        t_final = 0.0
    else:
        chk.fail(("t_final",), "required key missing")
    if engine != "standard-map" and not t_final > 0:
        chk.fail(("t_final",), "must be > 0")

    seed = int(raw.get("seed", 0))
    if seed < 0:
        chk.fail(("seed",), "must be >= 0")
    n_samples = int(raw.get("n_samples", 101))
    if n_samples < 2:
        chk.fail(("n_samples",), "must be >= 2")
    workers = int(raw.get("workers", 1))
    if workers < 1:
        chk.fail(("workers",), "must be >= 1")

    out_dir = str(raw.get("output_dir", "results"))
    if base_dir is not None and not Path(out_dir).is_absolute():
        out_dir = str((Path(base_dir) / out_dir).resolve())

    base_ens = QUANTUM_ENSEMBLE if engine == "quantum" else CLASSICAL_ENSEMBLE
    ens_raw = {**base_ens, **raw.get("ensemble", {})}
    ens = EnsembleConfig(int(ens_raw["n"]), float(ens_raw["z_mean"]), float(ens_raw["p_mean"]),
                         float(ens_raw["z_std"]), float(ens_raw["p_std"]))
    if ens.n < 1:
        chk.fail(("ensemble", "n"), "must be >= 1")
    if not (ens.z_std > 0 and ens.p_std >= 0):
        chk.fail(("ensemble",), "z_std must be > 0 and p_std >= 0")

    q_raw = raw.get("quantum", {})
    model = dict(MODEL_DEFAULTS)
    if phys_dimless is not None:
        model.update(kbar=phys_dimless.kbar, v0=phys_dimless.v0, kappa=phys_dimless.kappa)
    model.update({k: float(q_raw[k]) for k in ("kbar", "v0", "kappa") if k in q_raw})
    grid = None
    if "grid" in q_raw:
        g = q_raw["grid"]
        missing = [k for k in ("z_min", "z_max", "n_points") if k not in g]
        if missing:
            chk.fail(("quantum", "grid"), f"missing keys {missing}")
        n = int(g["n_points"])
        if not g["z_max"] > g["z_min"]:
            chk.fail(("quantum", "grid"), "z_max must exceed z_min")
        if n < 256 or n & (n - 1):
            chk.fail(("quantum", "grid", "n_points"), "must be a power of two >= 256")
        grid = GridConfig(float(g["z_min"]), float(g["z_max"]), n)
    absorber = q_raw.get("absorber", {})
    quantum = QuantumConfig(
        kbar=model["kbar"], v0=model["v0"], kappa=model["kappa"],
        dt=float(q_raw.get("dt", 2e-3)), sample_stride=int(q_raw.get("sample_stride", 250)),
        grid=grid, absorber_frac=float(absorber.get("frac", 0.05)),
        absorber_on=bool(absorber.get("on", True)))
    if not quantum.kbar > 0:
        chk.fail(("quantum", "kbar"), "must be > 0")
    if not quantum.kappa > 0 or quantum.v0 < 0:
        chk.fail(("quantum",), "kappa must be > 0 and v0 >= 0")
    if not quantum.dt > 0:
        chk.fail(("quantum", "dt"), "must be > 0")
    if quantum.sample_stride < 1:
        chk.fail(("quantum", "sample_stride"), "must be >= 1")
    if not 0 < quantum.absorber_frac < 0.5:
        chk.fail(("quantum", "absorber", "frac"), "must lie in (0, 0.5)")

    c_raw = raw.get("classical", {})
    classical_dt = float(c_raw["dt"]) if "dt" in c_raw else None
    if classical_dt is not None and not classical_dt > 0:
        chk.fail(("classical", "dt"), "must be > 0")
    hist_bins = int(c_raw["hist_bins"]) if "hist_bins" in c_raw else None
    if hist_bins is not None and hist_bins < 2:
        chk.fail(("classical", "hist_bins"), "must be >= 2")

    sm = raw.get("standard_map", {})
    sm_particles = int(sm.get("n_particles", 100_000))
    sm_steps = int(sm.get("n_steps", 500))
    if sm_particles < 1 or sm_steps < 100:
        chk.fail(("standard_map",), "n_particles must be >= 1 and n_steps >= 100")

    figure = raw.get("figure")
    if figure is not None and figure not in FIGURES:
        chk.fail(("figure",), f"expected one of {', '.join(FIGURES)}")

    if engine == "quantum":
        implied = quantum.kbar / (2.0 * ens.z_std)
        derived["packet_p_std"] = implied
        if ens.p_std > 0 and abs(implied - ens.p_std) > 0.01 * ens.p_std:
            derived["packet_note"] = (
                f"minimum-uncertainty packet has p_std={implied!r}, not the requested "
                f"{ens.p_std!r}; the packet width in z is used")

    return RunConfig(engine=engine, lambdas=lambdas, lambda_spec=lambda_spec, t_final=t_final,
                     seed=seed, n_samples=n_samples, workers=workers, output_dir=out_dir,
                     ensemble=ens, quantum=quantum, classical_dt=classical_dt,
                     hist_bins=hist_bins, sm_particles=sm_particles, sm_steps=sm_steps,
                     figure=figure, physical=physical, derived=derived)

"""Experiment configuration: YAML in, validated model objects out.

Matrices are row-major: a list of rows, each row a list of ``[re, im]``
pairs. A flat list of d*d pairs is also accepted. State amplitudes are a
list of ``[re, im]`` pairs. See ``data/qubit.yaml`` for a full example.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .core import HamiltonianSchedule, HermitianOperator, PureState
from .errors import ConfigError, QDiscernError
from .experiments import Model
from .measurement import Povm

DEFAULTS = {
    "hbar": 1.0,
    "alpha": 0.05,
    "threshold": 0.1,
    "seed": 0,
    "trials": 500,
    "fd_step": 1e-3,
}


def bundled_config_path(name: str = "qubit.yaml") -> Path:
    return Path(str(resources.files("qdiscern") / "data" / name))


def _fail(where: str, msg: str):
    raise ConfigError(f"{where}: {msg}")


def _complex_entry(x, where):
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return complex(float(x), 0.0)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in x
    ):
        return complex(float(x[0]), float(x[1]))
    _fail(where, f"expected a number or a [re, im] pair, got {x!r}")


def parse_vector(data, where: str) -> np.ndarray:
    if not isinstance(data, list) or not data:
        _fail(where, "expected a non-empty list of [re, im] pairs")
    return np.array([_complex_entry(x, f"{where}[{i}]") for i, x in enumerate(data)])


def parse_matrix(data, where: str, d: int | None = None) -> np.ndarray:
    if not isinstance(data, list) or not data:
        _fail(where, "expected a matrix as a list of rows of [re, im] pairs")
    nested = all(isinstance(r, list) and r and isinstance(r[0], list) for r in data)
    if nested:
        rows = [parse_vector(r, f"{where}[{i}]") for i, r in enumerate(data)]
        if len({len(r) for r in rows}) != 1 or len(rows[0]) != len(rows):
            _fail(where, "matrix must be square")
        m = np.array(rows)
    else:
        flat = parse_vector(data, where)
        k = math.isqrt(flat.size)
        if k * k != flat.size:
            _fail(where, f"flat matrix has {flat.size} entries, not a perfect square")
        m = flat.reshape(k, k)
    if d is not None and m.shape[0] != d:
        _fail(where, f"matrix is {m.shape[0]}x{m.shape[0]} but the state has dimension {d}")
    return m


def format_matrix(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def format_vector(v: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v)]


def _float_list(data, where) -> list[float]:
    if isinstance(data, dict):
        try:
            start, stop, num = float(data["start"]), float(data["stop"]), int(data["num"])
        except (KeyError, TypeError, ValueError) as exc:
            _fail(where, f"range needs numeric start, stop, num ({exc})")
        if data.get("log", False):
            if start <= 0 or stop <= 0:
                _fail(where, "log ranges need positive endpoints")
            return [float(x) for x in np.geomspace(start, stop, num)]
        return [float(x) for x in np.linspace(start, stop, num)]
    if isinstance(data, (int, float)) and not isinstance(data, bool):
        return [float(data)]
    if not isinstance(data, list):
        _fail(where, "expected a list of numbers or a {start, stop, num} range")
    try:
        return [float(x) for x in data]
    except (TypeError, ValueError):
        _fail(where, f"non-numeric entry in {data!r}")


def _int_list(data, where) -> list[int]:
    if isinstance(data, int) and not isinstance(data, bool):
        data = [data]
    if not isinstance(data, list) or not all(isinstance(x, int) and x >= 1 for x in data):
        _fail(where, "expected a list of positive integers")
    return list(data)


@dataclass
class ExperimentConfig:
    model: dict
    measurements: list = field(default_factory=lambda: ["pi", "sld"])
    dt: list = field(default_factory=lambda: [0.0, 0.01, 0.02, 0.05, 0.1])
    n: list = field(default_factory=lambda: [1, 2, 5, 10, 20])
    alpha: float = DEFAULTS["alpha"]
    threshold: float = DEFAULTS["threshold"]
    seed: int = DEFAULTS["seed"]
    trials: int = DEFAULTS["trials"]
    fd_step: float = DEFAULTS["fd_step"]
    monte_carlo_samples: int | None = None
    stein: dict | None = None
    output: dict = field(default_factory=lambda: {"format": "csv", "path": None})
    normalize_state: bool = False

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            _fail("<root>", "config must be a mapping")
        known = {"model", "measurements", "grid", "threshold", "seed", "trials", "fd_step",
                 "monte_carlo_samples", "stein", "output", "normalize_state"}
        extra = set(raw) - known
        if extra:
            _fail("<root>", f"unknown keys {sorted(extra)}")
        if "model" not in raw:
            _fail("model", "missing")
        grid = raw.get("grid") or {}
        if not isinstance(grid, dict):
            _fail("grid", "expected a mapping")
        cfg = cls(model=copy.deepcopy(raw["model"]))
        if "measurements" in raw:
            cfg.measurements = raw["measurements"]
        if "dt" in grid:
            cfg.dt = _float_list(grid["dt"], "grid.dt")
        if "n" in grid:
            cfg.n = _int_list(grid["n"], "grid.n")
        if "alpha" in grid:
            cfg.alpha = grid["alpha"]
        for key in ("threshold", "seed", "trials", "fd_step", "monte_carlo_samples",
                    "stein", "normalize_state"):
            if key in raw:
                setattr(cfg, key, raw[key])
        if "output" in raw:
            out = raw["output"] or {}
            if not isinstance(out, dict):
                _fail("output", "expected a mapping")
            cfg.output = {"format": out.get("format", "csv"), "path": out.get("path")}
        cfg.validate()
        return cfg

    def validate(self):
        try:
            self.alpha = float(self.alpha)
            self.threshold = float(self.threshold)
            self.fd_step = float(self.fd_step)
        except (TypeError, ValueError) as exc:
            _fail("<root>", str(exc))
        if not 0 < self.alpha < 1:
            _fail("grid.alpha", f"must lie in (0, 1), got {self.alpha}")
        if not self.threshold > 0:
            _fail("threshold", f"must be positive, got {self.threshold}")
        if not isinstance(self.seed, int) or self.seed < 0:
            _fail("seed", f"must be a non-negative integer, got {self.seed!r}")
        if not isinstance(self.trials, int) or self.trials < 0:
            _fail("trials", "must be a non-negative integer")
        if self.monte_carlo_samples is not None and (
            not isinstance(self.monte_carlo_samples, int) or self.monte_carlo_samples < 1000
        ):
            _fail("monte_carlo_samples", "must be an integer >= 1000")
        if any(t < 0 or not math.isfinite(t) for t in self.dt):
            _fail("grid.dt", "entries must be finite and >= 0")
        if not isinstance(self.measurements, list) or not self.measurements:
            _fail("measurements", "expected a non-empty list")
        if self.output.get("format", "csv") != "csv":
            _fail("output.format", f"unsupported format {self.output['format']!r}")
        if self.stein is not None:
            if not isinstance(self.stein, dict) or not {"p0", "p1"} <= set(self.stein):
                _fail("stein", "expected a mapping with p0 and p1")
            for k in ("p0", "p1"):
                self.stein[k] = [float(x) for x in _float_list(self.stein[k], f"stein.{k}")]
        # building the model surfaces every model-level error early
        self.build_model()
        self.build_measurements()

    def build_model(self) -> Model:
        spec = self.model
        if not isinstance(spec, dict):
            _fail("model", "expected a mapping")
        for key in ("state", "segments"):
            if key not in spec:
                _fail(f"model.{key}", "missing")
        amps = parse_vector(spec["state"], "model.state")
        d = amps.size
        try:
            psi0 = PureState.normalized(amps) if self.normalize_state else PureState(amps)
        except QDiscernError as exc:
            _fail("model.state", f"{exc} (pass --normalize-state to rescale)")
        segs = spec["segments"]
        if not isinstance(segs, list) or not segs:
            _fail("model.segments", "expected a non-empty list")
        parsed = []
        for i, seg in enumerate(segs):
            where = f"model.segments[{i}]"
            if not isinstance(seg, dict) or "hamiltonian" not in seg:
                _fail(where, "expected a mapping with 'hamiltonian' and 'duration'")
            m = parse_matrix(seg["hamiltonian"], f"{where}.hamiltonian", d)
            try:
                H = HermitianOperator(m)
            except QDiscernError as exc:
                _fail(f"{where}.hamiltonian", str(exc))
            try:
                dur = float(seg.get("duration", 1.0))
            except (TypeError, ValueError):
                _fail(f"{where}.duration", "not a number")
            if not dur > 0:
                _fail(f"{where}.duration", "must be positive")
            parsed.append((H, dur))
        try:
            hbar = float(spec.get("hbar", DEFAULTS["hbar"]))
        except (TypeError, ValueError):
            _fail("model.hbar", "not a number")
        if not hbar > 0:
            _fail("model.hbar", "must be positive")
        sched = HamiltonianSchedule(tuple(parsed), t0=float(spec.get("t0", 0.0)), hbar=hbar)
        return Model(psi0, sched, str(spec.get("label", "model")))

    def build_measurements(self) -> list:
        """Measurement specs with explicit POVMs converted to ``(label, Povm)``."""
        d = parse_vector(self.model["state"], "model.state").size
        out = []
        for i, m in enumerate(self.measurements):
            where = f"measurements[{i}]"
            if isinstance(m, str):
                if m in ("pi", "sld"):
                    out.append(m)
                elif m.startswith("random:"):
                    try:
                        k = int(m.split(":", 1)[1])
                    except ValueError:
                        _fail(where, f"bad random spec {m!r}")
                    if k < 1:
                        _fail(where, "random count must be >= 1")
                    out.append(m)
                else:
                    _fail(where, f"unknown measurement {m!r} (pi | sld | random:<count> | povm)")
            elif isinstance(m, dict) and "povm" in m:
                els = [parse_matrix(e, f"{where}.povm[{j}]", d) for j, e in enumerate(m["povm"])]
                try:
                    povm = Povm(tuple(els))
                except QDiscernError as exc:
                    _fail(f"{where}.povm", str(exc))
                except ValueError as exc:
                    _fail(f"{where}.povm", str(exc))
                out.append((str(m.get("label", f"povm{i}")), povm))
            else:
                _fail(where, f"unrecognized measurement entry {m!r}")
        return out

    def to_dict(self) -> dict:
        out = {
            "model": copy.deepcopy(self.model),
            "measurements": copy.deepcopy(self.measurements),
            "grid": {"dt": list(self.dt), "n": list(self.n), "alpha": self.alpha},
            "threshold": self.threshold,
            "seed": self.seed,
            "trials": self.trials,
            "fd_step": self.fd_step,
            "monte_carlo_samples": self.monte_carlo_samples,
            "normalize_state": self.normalize_state,
            "output": dict(self.output),
        }
        if self.stein is not None:
            out["stein"] = copy.deepcopy(self.stein)
        return out

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)


def load_config(path: str | Path | None, normalize_state: bool = False) -> ExperimentConfig:
    """Read a YAML config; ``None`` loads the bundled qubit example.

    ``normalize_state=True`` rescales the initial state before validation.
    """
    p = Path(path) if path is not None else bundled_config_path()
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read config ({exc.strerror})") from exc
    return loads_config(text, str(p), normalize_state)


def loads_config(text: str, source: str = "<string>", normalize_state: bool = False) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ConfigError(f"{where}: {exc.problem}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if normalize_state and isinstance(raw, dict):
        raw["normalize_state"] = True
    return ExperimentConfig.from_dict(raw)

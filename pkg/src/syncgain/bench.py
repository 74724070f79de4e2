"""Benchmark harness: scenario configs, per-method runs and CSV output."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import synth
from .errors import ConfigError, SyncGainError
from .graph import PRESET_NAMES, WeightedDigraph, laplacian, nonzero_spectrum, preset
from .linalg import Plant, matrix_2norm
from .sim import DEFAULT_SEED, DEFAULT_STEP, initial_state, integrate, write_trajectory_csv
from .verify import estimate_rate

log = logging.getLogger(__name__)

TABLE_HEADER = ("scenario", "method", "mu_hat", "gain_norm", "time_s", "iters", "status")

# Lateral dynamics of the X-29A forward-swept-wing aircraft.
X29_A = [
    [-2.059, 0.997, -16.55, 0.0],
    [-0.1023, -0.0679, 6.779, 0.0],
    [-0.0603, -0.9928, -0.1645, 0.04413],
    [1.0, 0.07168, 0.0, 0.0],
]
X29_B = [
    [1.347, 0.2365],
    [0.09194, -0.07056],
    [-0.0006141, 0.0006866],
    [0.0, 0.0],
]
OSC_A = [[0.0, -1.0], [1.0, 0.0]]
OSC_B = [[0.0], [1.0]]

PLANT_PRESETS = {"osc": (OSC_A, OSC_B), "x29": (X29_A, X29_B)}
DEFAULT_HORIZON = {"osc": 20.0, "x29": 10.0}
FALLBACK_HORIZON = 10.0


def plant_preset(name: str) -> Plant:
    try:
        A, B = PLANT_PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown plant preset {name!r}; choose from {', '.join(PLANT_PRESETS)}") from None
    return Plant(A, B)


@dataclass
class PlantSpec:
    name: str
    plant: Plant
    horizon: float


@dataclass
class GraphSpec:
    name: str
    graph: WeightedDigraph


def resolve_seed(seed: int) -> int:
    """The ``SYNC_SEED`` environment variable, when set, overrides ``seed``."""
    env = os.environ.get("SYNC_SEED")
    if env is None or env.strip() == "":
        return int(seed)
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"SYNC_SEED must be an integer, got {env!r}") from None


def _parse_plant(obj) -> PlantSpec:
    if isinstance(obj, str):
        return PlantSpec(obj, plant_preset(obj), DEFAULT_HORIZON[obj])
    if isinstance(obj, dict) and "A" in obj and "B" in obj:
        name = str(obj.get("name", "custom"))
        try:
            p = Plant(obj["A"], obj["B"])
        except (SyncGainError, ValueError) as exc:
            raise ConfigError(f"plant {name!r}: {exc}") from exc
        return PlantSpec(name, p, float(obj.get("horizon", FALLBACK_HORIZON)))
    raise ConfigError(f"plant must be a preset name or an object with A and B, got {obj!r}")


def _parse_graph(obj) -> GraphSpec:
    if isinstance(obj, str):
        try:
            return GraphSpec(obj, preset(obj))
        except KeyError:
            raise ConfigError(f"unknown graph preset {obj!r}; choose from {', '.join(PRESET_NAMES)}") from None
    if isinstance(obj, dict):
        name = str(obj.get("name", "custom"))
        try:
            if "weights" in obj:
                g = WeightedDigraph(obj["weights"])
            else:
                g = WeightedDigraph.from_edges(int(obj["n"]), obj["edges"])
        except (SyncGainError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"graph {name!r}: {exc}") from exc
        return GraphSpec(name, g)
    raise ConfigError(f"graph must be a preset name or an inline object, got {obj!r}")


def _as_list(value):
    return value if isinstance(value, list) else [value]


@dataclass
class ScenarioConfig:
    """Benchmark configuration; the cartesian product plants x graphs forms the scenarios."""

    plants: list = field(default_factory=lambda: ["osc", "x29"])
    graphs: list = field(default_factory=lambda: list(PRESET_NAMES))
    methods: list = field(default_factory=lambda: list(synth.METHODS))
    kbar: float = 20.0
    tolerance: float = 1e-3
    alpha_grid: list = field(default_factory=lambda: list(synth.DEFAULT_ALPHA_GRID))
    mu_tol: float = 1e-4
    max_iter: int = 50
    horizon: float | None = None  # None: per-plant default
    step: float = DEFAULT_STEP
    seed: int = DEFAULT_SEED
    workers: int = 1
    backend: str = "clarabel"

    def __post_init__(self):
        self.plants = _as_list(self.plants)
        self.graphs = _as_list(self.graphs)
        self.methods = list(self.methods)
        bad = [m for m in self.methods if m not in synth.METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {', '.join(synth.METHODS)}")
        if self.horizon is not None and self.horizon < 0:
            raise ConfigError("horizon must be nonnegative")
        if self.step <= 0:
            raise ConfigError("step must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        self._plant_specs = [_parse_plant(p) for p in self.plants]
        self._graph_specs = [_parse_graph(g) for g in self.graphs]
        try:
            self.algorithm_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, obj: dict) -> "ScenarioConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        obj = dict(obj)
        if "plant" in obj:
            obj["plants"] = _as_list(obj.pop("plant"))
        if "graph" in obj:
            obj["graphs"] = _as_list(obj.pop("graph"))
        known = set(cls.__dataclass_fields__) - {"_plant_specs", "_graph_specs"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(obj)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        return cls.from_json(text)

    def effective_seed(self) -> int:
        return resolve_seed(self.seed)

    def algorithm_config(self) -> synth.AlgorithmConfig:
        return synth.AlgorithmConfig(kbar=self.kbar, tolerance=self.tolerance, alpha_grid=tuple(self.alpha_grid),
                                     mu_tol=self.mu_tol, max_iter=self.max_iter, backend=self.backend)

    def scenarios(self):
        """``(scenario_id, PlantSpec, GraphSpec)`` in stable order."""
        return [(f"{ps.name}/{gs.name}", ps, gs) for ps in self._plant_specs for gs in self._graph_specs]

    def horizon_for(self, ps: PlantSpec) -> float:
        return ps.horizon if self.horizon is None else float(self.horizon)


@dataclass
class BenchRow:
    scenario: str
    method: str
    mu_hat: float | None
    gain_norm: float | None
    time_s: float | None
    iters: int | None
    status: str = "ok"
    gain: np.ndarray | None = field(default=None, repr=False, compare=False)
    mu_star: float | None = field(default=None, compare=False)
    mu_trace: list = field(default_factory=list, repr=False, compare=False)


def _run_cell(args) -> BenchRow:
    sid, p, g, method, acfg = args
    t0 = time.perf_counter()
    try:
        res = synth.design(method, p, g, acfg)
    except SyncGainError as exc:
        log.warning("%s %s failed: %s", sid, method, exc)
        return BenchRow(sid, method, None, None, time.perf_counter() - t0, None, f"error:{type(exc).__name__}")
    elapsed = time.perf_counter() - t0
    if res is None:
        return BenchRow(sid, method, None, None, elapsed, None, "infeasible")
    # never trust synth's own numbers
    mu_hat = estimate_rate(p, nonzero_spectrum(laplacian(g)), res.gain).mu_hat
    status = "degraded" if res.degraded else "ok"
    if mu_hat <= 0:
        status = "unstable"
    iters = res.iterations if method == "alg1" else None
    return BenchRow(sid, method, mu_hat, matrix_2norm(res.gain), elapsed, iters, status,
                    gain=np.array(res.gain), mu_star=res.mu_star, mu_trace=list(res.mu_trace))


def run_benchmark(cfg: ScenarioConfig) -> list[BenchRow]:
    acfg = cfg.algorithm_config()
    cells = [(sid, ps.plant, gs.graph, m, acfg)
             for sid, ps, gs in cfg.scenarios() for m in cfg.methods]
    if cfg.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = []
        for cell in cells:
            rows.append(_run_cell(cell))
            log.info("%s %s: %s", cell[0], cell[3], rows[-1].status)
    order = {m: i for i, m in enumerate(synth.METHODS)}
    scen_order = {sid: i for i, (sid, _, _) in enumerate(cfg.scenarios())}
    rows.sort(key=lambda r: (scen_order[r.scenario], order[r.method]))
    return rows


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.10g}"


def emit_table(rows, path, timing: bool = True) -> None:
    """Write the summary CSV to a path or an open text stream.

    ``timing=False`` blanks wall times for byte-reproducible output.
    """
    if hasattr(path, "write"):
        _write_table(rows, path, timing)
        return
    with open(path, "w", newline="") as fh:
        _write_table(rows, fh, timing)


def _write_table(rows, fh, timing):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TABLE_HEADER)
    for r in rows:
        w.writerow([r.scenario, r.method, _fmt(r.mu_hat), _fmt(r.gain_norm),
                    _fmt(r.time_s) if timing else "", _fmt(r.iters), r.status])


def read_table(path) -> list[BenchRow]:
    def num(s, cast=float):
        return None if s == "" else cast(s)

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TABLE_HEADER:
            raise ConfigError(f"unexpected table header {reader.fieldnames}")
        return [BenchRow(d["scenario"], d["method"], num(d["mu_hat"]), num(d["gain_norm"]),
                         num(d["time_s"]), num(d["iters"], int), d["status"]) for d in reader]


def trajectory_filename(scenario: str, method: str) -> str:
    return f"{scenario.replace('/', '_')}_{method}.csv"


def emit_trajectories(cfg: ScenarioConfig, gains, prefix, include_states: bool = False) -> list[Path]:
    """One CSV per (scenario, method) gain; methods of a scenario share ``x0``.

    ``gains`` maps ``(scenario_id, method)`` to a gain matrix, or is a list
    of BenchRows (rows without a gain are skipped).
    """
    if not isinstance(gains, dict):
        gains = {(r.scenario, r.method): r.gain for r in gains if r.gain is not None}
    prefix = str(prefix)
    if prefix.endswith(os.sep):
        Path(prefix).mkdir(parents=True, exist_ok=True)
    seed = cfg.effective_seed()
    written = []
    for sid, ps, gs in cfg.scenarios():
        L = laplacian(gs.graph)
        x0 = initial_state(gs.graph.n_agents, ps.plant.n, seed)
        for m in cfg.methods:
            K = gains.get((sid, m))
            if K is None:
                continue
            traj = integrate(x0, ps.plant, K, L, cfg.horizon_for(ps), cfg.step)
            path = Path(prefix + trajectory_filename(sid, m))
            write_trajectory_csv(traj, path, include_states)
            written.append(path)
    return written


def save_gain(K, path) -> None:
    K = np.atleast_2d(np.asarray(K, dtype=float))
    Path(path).write_text(json.dumps({"m": K.shape[0], "n": K.shape[1], "K": K.reshape(-1).tolist()}))


def load_gain(path) -> np.ndarray:
    try:
        obj = json.loads(Path(path).read_text())
        m, n = int(obj["m"]), int(obj["n"])
        K = np.array(obj["K"], dtype=float)
        if K.size != m * n:
            raise ValueError(f"K has {K.size} entries, expected {m * n}")
        return K.reshape(m, n)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot load gain: {exc}") from exc

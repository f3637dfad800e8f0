"""Command-line entry point.

Subcommands::

    uavqd run CONFIG.json          simulate a built-in model
    uavqd compare A.csv B.csv      deviation report between two trajectories
    uavqd decompose WORD THETA     Pauli rotation as CNOT/RZ/BASIS lines
    uavqd pool N_QUBITS MAX_WEIGHT list the operator pool
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .decompose import decompose_rotation, gate_count
from .lindblad import TrajectoryRecord, _jsonable, exact_evolve
from .models import (
    AMPLITUDE_DAMPING_GAMMA,
    AMPLITUDE_DAMPING_RHO0,
    FMO_RATES,
    EmitterGeometry,
    all_excited,
    amplitude_damping_model,
    dicke_model,
    fmo_initial,
    fmo_model,
)
from .pauli import build_pool
from .variational import EngineConfig, ReconstructionError, run

logger = logging.getLogger("uavqd")

CONFIG_HELP = """\
Configuration file (JSON).  Unknown keys are rejected.

  model      (required) object with "name" and model parameters:
               amplitude_damping: gamma [s^-1, 1.52e9], time_unit ["ns"|"ps", "ns"]
               fmo: alpha, beta, gamma_sink [fs^-1, 3e-3, 5e-7, 6.28e-3],
                    time_unit ["ps"|"fs", "ps"], initial_site [1]
               dicke: lattice ["chain"|"grid", "chain"], n [3],
                      spacing_over_lambda (required), polarization [[0,0,1]],
                      keep_omega0 [false]
  solver     "exact" | "uavqd" | "both"   ["both"]
  engine     (uavqd/both) adaptive_threshold (required),
             pool {"n_qubits": [2 x model qubits], "max_weight": (required)},
             regularization_cutoff [1e-8], max_adds_per_step [10],
             gauge ["projected"|"conjugated"], integrator ["euler"|"rk2"],
             candidate_screen [null]
  time       t_final, dt (required, model time units), output_stride [1]
  output     directory ["."], basename ["run"]
  seed       integer, recorded only [0]
"""


class ConfigError(ValueError):
    pass


def _take(block: dict, where: str, allowed: dict) -> dict:
    """Merge ``block`` over defaults in ``allowed``; ``...`` marks a required key."""
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key {where}.{unknown[0]}")
    out = {}
    for key, default in allowed.items():
        if key in block:
            out[key] = block[key]
        elif default is ...:
            raise ConfigError(f"missing required key {where}.{key}")
        else:
            out[key] = default
    return out


_MODEL_KEYS = {
    "amplitude_damping": {"name": ..., "gamma": AMPLITUDE_DAMPING_GAMMA, "time_unit": "ns"},
    "fmo": {"name": ..., "alpha": FMO_RATES["alpha"], "beta": FMO_RATES["beta"],
            "gamma_sink": FMO_RATES["gamma_sink"], "time_unit": "ps", "initial_site": 1},
    "dicke": {"name": ..., "lattice": "chain", "n": 3, "spacing_over_lambda": ...,
              "polarization": [0.0, 0.0, 1.0], "keep_omega0": False},
}
_AD_TIME_SCALE = {"ns": 1e-9, "ps": 1e-12}


@dataclass
class RunConfig:
    model: dict
    solver: str = "both"
    engine: dict | None = None
    time: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        top = _take(raw, "config", {"model": ..., "solver": "both", "engine": None,
                                    "time": ..., "output": {}, "seed": 0})
        name = top["model"].get("name") if isinstance(top["model"], dict) else None
        if name not in _MODEL_KEYS:
            raise ConfigError(f"model.name must be one of {sorted(_MODEL_KEYS)}, got {name!r}")
        model = _take(top["model"], "model", _MODEL_KEYS[name])
        if top["solver"] not in ("exact", "uavqd", "both"):
            raise ConfigError(f"solver must be exact, uavqd or both, got {top['solver']!r}")
        time = _take(top["time"], "time", {"t_final": ..., "dt": ..., "output_stride": 1})
        if not time["dt"] > 0 or not time["t_final"] > 0:
            raise ConfigError("time.dt and time.t_final must be positive")
        if int(time["output_stride"]) < 1:
            raise ConfigError("time.output_stride must be >= 1")
        engine = None
        if top["solver"] != "exact":
            if top["engine"] is None:
                raise ConfigError("engine block is required for uavqd runs")
            engine = _take(top["engine"], "engine", {
                "adaptive_threshold": ..., "pool": ..., "regularization_cutoff": 1e-8,
                "max_adds_per_step": 10, "gauge": "projected", "integrator": "euler",
                "candidate_screen": None})
            engine["pool"] = _take(engine["pool"], "engine.pool", {"n_qubits": None, "max_weight": ...})
        output = _take(top["output"], "output", {"directory": ".", "basename": "run"})
        if not isinstance(top["seed"], int):
            raise ConfigError("seed must be an integer")
        return cls(model, top["solver"], engine, time, output, top["seed"])

    def build_model(self):
        m = self.model
        try:
            if m["name"] == "amplitude_damping":
                if m["time_unit"] not in _AD_TIME_SCALE:
                    raise ConfigError("model.time_unit must be ns or ps")
                model = amplitude_damping_model(m["gamma"], _AD_TIME_SCALE[m["time_unit"]], m["time_unit"])
                return model, AMPLITUDE_DAMPING_RHO0
            if m["name"] == "fmo":
                model = fmo_model(m["alpha"], m["beta"], m["gamma_sink"], m["time_unit"])
                return model, fmo_initial(m["initial_site"])
            if m["lattice"] not in ("chain", "grid"):
                raise ConfigError("model.lattice must be chain or grid")
            build = EmitterGeometry.chain if m["lattice"] == "chain" else EmitterGeometry.grid
            geom = build(m["n"], m["spacing_over_lambda"], polarization=np.asarray(m["polarization"], float))
            return dicke_model(geom, keep_omega0=m["keep_omega0"]), all_excited(m["n"])
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"model: {exc}") from exc

    def build_engine(self, model) -> EngineConfig:
        e = self.engine
        n_qubits = e["pool"]["n_qubits"] = e["pool"]["n_qubits"] or 2 * model.n_qubits
        try:
            return EngineConfig(
                dt=self.time["dt"],
                t_final=self.time["t_final"],
                adaptive_threshold=e["adaptive_threshold"],
                pool=build_pool(n_qubits, e["pool"]["max_weight"]),
                regularization_cutoff=e["regularization_cutoff"],
                max_adds_per_step=e["max_adds_per_step"],
                gauge=e["gauge"],
                integrator=e["integrator"],
                candidate_screen=e["candidate_screen"],
            )
        except ValueError as exc:
            raise ConfigError(f"engine: {exc}") from exc

    def resolved(self) -> dict:
        return {"model": self.model, "solver": self.solver, "engine": self.engine,
                "time": self.time, "output": self.output, "seed": self.seed}


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return RunConfig.from_dict(raw)


def compare(a: TrajectoryRecord, b: TrajectoryRecord) -> dict:
    """Per-observable max-absolute and RMS deviation of ``b`` from ``a``."""
    if a.time_unit and b.time_unit and a.time_unit != b.time_unit:
        raise ValueError(f"time units differ: {a.time_unit} vs {b.time_unit}")
    if len(a.times) != len(b.times) or not np.allclose(a.times, b.times, rtol=1e-12, atol=0):
        raise ValueError("trajectories are on different time grids")
    names = [k for k in a.observables if k in b.observables]
    if not names:
        raise ValueError("trajectories share no observables")
    report = {}
    for k in names:
        diff = np.asarray(b.observables[k]) - np.asarray(a.observables[k])
        report[k] = {"max_abs": float(np.max(np.abs(diff))), "rms": float(np.sqrt(np.mean(diff**2)))}
    return {
        "observables": report,
        "max_abs": max(r["max_abs"] for r in report.values()),
        "rms": max(r["rms"] for r in report.values()),
    }


CONVENTIONS = {
    "vectorization": "column-stacking, vec index i + N*j holds rho[i, j]",
    "qubit_order": "qubit 0 is the leftmost Kronecker factor",
    "rotation": "exp(-i theta P / 2)",
    "rates": "folded into jump operators as sqrt(rate) * L",
    "observables": "read from the trace-renormalized reconstruction",
}


def run_experiment(cfg: RunConfig) -> dict[str, Path]:
    """Run the configured solvers and write CSV trajectories plus a metadata sidecar."""
    model, rho0 = cfg.build_model()
    engine = cfg.build_engine(model) if cfg.solver != "exact" else None
    stride = int(cfg.time["output_stride"])
    n_steps = int(round(cfg.time["t_final"] / cfg.time["dt"]))
    idx = sorted(set(range(0, n_steps + 1, stride)) | {n_steps})
    grid = np.array(idx) * cfg.time["dt"]

    outdir = Path(cfg.output["directory"])
    outdir.mkdir(parents=True, exist_ok=True)
    base = outdir / cfg.output["basename"]
    written: dict[str, Path] = {}
    meta = {
        "config": cfg.resolved(),
        "model": {"name": model.name, "time_unit": model.time_unit, "parameters": model.parameters},
        "conventions": CONVENTIONS,
        "versions": {"uavqd": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }

    exact = None
    if cfg.solver in ("exact", "both"):
        exact = exact_evolve(model, rho0, grid)
        exact.states = None
        written["exact"] = base.with_suffix(".exact.csv")
        exact.to_csv(written["exact"])
        meta["exact"] = exact.metadata
    if engine is not None:
        record = run(model, rho0, engine, output_stride=stride, reference=exact)
        written["uavqd"] = base.with_suffix(".uavqd.csv")
        record.to_csv(written["uavqd"])
        meta["uavqd"] = record.metadata
        if exact is not None:
            meta["comparison"] = compare(exact, record)
    written["meta"] = base.with_suffix(".meta.json")
    meta["time_unit"] = model.time_unit
    written["meta"].write_text(json.dumps(meta, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return written


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavqd", description=__doc__, epilog=CONFIG_HELP,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="simulate a built-in model", description=CONFIG_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("config")
    p = sub.add_parser("compare", help="compare two trajectory CSVs")
    p.add_argument("reference")
    p.add_argument("candidate")
    p = sub.add_parser("decompose", help="decompose exp(-i theta P / 2) into basis gates")
    p.add_argument("pauli")
    p.add_argument("theta", type=float)
    p.add_argument("--counts", action="store_true", help="print gate tallies instead")
    p = sub.add_parser("pool", help="list the operator pool")
    p.add_argument("n_qubits", type=int)
    p.add_argument("max_weight", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            for kind, path in run_experiment(load_config(args.config)).items():
                print(f"{kind}: {path}")
        elif args.command == "compare":
            a = TrajectoryRecord.from_csv(args.reference)
            b = TrajectoryRecord.from_csv(args.candidate)
            print(json.dumps(compare(a, b), indent=2))
        elif args.command == "decompose":
            seq = decompose_rotation(args.pauli, args.theta)
            sys.stdout.write(json.dumps(gate_count(seq)) + "\n" if args.counts else seq.to_text())
        elif args.command == "pool":
            for p in build_pool(args.n_qubits, args.max_weight):
                print(p)
    except (ConfigError, ValueError, ReconstructionError, OSError) as exc:
        print(f"uavqd: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

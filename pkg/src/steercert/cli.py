"""Command-line front end: single certifications, parameter sweeps over
visibility or detection efficiency, see-saw searches, and steerability
tests, with CSV/JSON artifacts suitable for plotting.

Configurations are JSON documents (see `ExperimentConfig`); command-line
flags override file fields. Named presets reproduce the standard curves.
Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import certify as certify_mod
from . import scenario as scen
from .seesaw import random_povms as _random_povms, seesaw as _seesaw_loop
from .qlin import Povm, basis_povm

KINDS = ("steering_local", "steering_global", "prepare_measure", "seesaw", "lhs")
STATE_KINDS = ("werner", "isotropic", "schmidt")
MEASUREMENT_KINDS = ("pauli_xz", "mub", "fourier_and_computational")
BOB_KINDS = ("pauli_x", "pauli_z", "computational", "fourier")
SWEEP_PARAMETERS = ("v", "eta")


class ConfigError(ValueError):
    def __init__(self, fld: str, message: str):
        super().__init__(f"{fld}: {message}")
        self.field = fld


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment (see module docstring)."""

    kind: str
    state: dict
    measurements: dict | None = None
    eta: float = 1.0
    x_star: int = 0
    bob_measurement: dict | None = None
    sweep: dict | None = None
    seeds: tuple[int, ...] = (0,)
    max_iters: int = 50
    tol: float = 1e-6
    out: str | None = None

    def to_json(self) -> dict:
        data = asdict(self)
        data["seeds"] = list(self.seeds)
        return data

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration field")
        kwargs = dict(data)
        if "seeds" in kwargs and kwargs["seeds"] is not None:
            kwargs["seeds"] = tuple(int(s) for s in kwargs["seeds"])
        return cls(**kwargs)

    # -- validation -------------------------------------------------------

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError("kind", f"must be one of {KINDS}, got {self.kind!r}")
        self._validate_state()
        if self.kind != "seesaw" and self.measurements is None:
            raise ConfigError("measurements", "required for this experiment kind")
        if self.measurements is not None:
            self._validate_measurements()
        if not 0.0 <= float(self.eta) <= 1.0:
            raise ConfigError("eta", f"detection efficiency must lie in [0, 1], got {self.eta}")
        n_inputs = self._n_inputs()
        if not 0 <= int(self.x_star) < n_inputs:
            raise ConfigError("x_star", f"must lie in [0, {n_inputs - 1}], got {self.x_star}")
        if self.kind == "steering_global":
            if self.bob_measurement is None:
                raise ConfigError("bob_measurement", "required for steering_global")
            if self.bob_measurement.get("kind") not in BOB_KINDS:
                raise ConfigError("bob_measurement", f"kind must be one of {BOB_KINDS}")
        if self.sweep is not None:
            self._validate_sweep()
        if not self.seeds:
            raise ConfigError("seeds", "must not be empty")
        if any(int(s) < 0 for s in self.seeds):
            raise ConfigError("seeds", "seeds must be non-negative integers")
        if int(self.max_iters) < 1:
            raise ConfigError("max_iters", "must be at least 1")
        if not float(self.tol) > 0:
            raise ConfigError("tol", "must be positive")

    def _validate_state(self) -> None:
        if not isinstance(self.state, dict) or "kind" not in self.state:
            raise ConfigError("state", "must be an object with a 'kind' key")
        kind = self.state["kind"]
        if kind not in STATE_KINDS:
            raise ConfigError("state.kind", f"must be one of {STATE_KINDS}, got {kind!r}")
        if kind in ("werner", "isotropic"):
            v = self.state.get("v")
            if v is None or not 0.0 <= float(v) <= 1.0:
                raise ConfigError("state.v", f"visibility must lie in [0, 1], got {v}")
        if kind == "isotropic":
            d = self.state.get("d")
            if d is None or int(d) < 2:
                raise ConfigError("state.d", f"local dimension must be >= 2, got {d}")
        if kind == "schmidt":
            lam = self.state.get("lambdas")
            if not lam or any(float(x) < 0 for x in lam) or abs(sum(map(float, lam)) - 1) > 1e-9:
                raise ConfigError("state.lambdas", "must be a probability vector")
            if self.kind == "seesaw" and any(float(x) == 0.0 for x in lam):
                raise ConfigError("state.lambdas", "see-saw ceiling needs strictly positive coefficients")

    def _validate_measurements(self) -> None:
        m = self.measurements
        if not isinstance(m, dict) or m.get("kind") not in MEASUREMENT_KINDS:
            raise ConfigError("measurements.kind", f"must be one of {MEASUREMENT_KINDS}")
        if m["kind"] == "mub":
            if "d" not in m or "count" not in m:
                raise ConfigError("measurements", "mub needs 'd' and 'count'")
        if m["kind"] == "fourier_and_computational" and "d" not in m:
            raise ConfigError("measurements", "fourier_and_computational needs 'd'")
        d_state = self._alice_dim()
        d_meas = {"pauli_xz": 2}.get(m["kind"], m.get("d"))
        if d_meas is not None and d_state is not None and int(d_meas) != d_state:
            raise ConfigError(
                "measurements", f"act on dimension {d_meas} but the state needs {d_state}"
            )

    def _validate_sweep(self) -> None:
        s = self.sweep
        if not isinstance(s, dict):
            raise ConfigError("sweep", "must be an object")
        parameter = s.get("parameter")
        if parameter not in SWEEP_PARAMETERS:
            raise ConfigError("sweep.parameter", f"must be one of {SWEEP_PARAMETERS}")
        if parameter == "v" and self.state["kind"] == "schmidt":
            raise ConfigError("sweep.parameter", "schmidt states have no visibility to sweep")
        try:
            start, stop = float(s["start"]), float(s["stop"])
            points = int(s["points"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError("sweep", "needs numeric 'start', 'stop' and integer 'points'") from None
        if points < 1:
            raise ConfigError("sweep.points", "must be at least 1")
        if not 0.0 <= start <= stop <= 1.0:
            raise ConfigError("sweep", f"range [{start}, {stop}] must be increasing inside [0, 1]")

    # -- construction helpers --------------------------------------------

    def _alice_dim(self) -> int | None:
        kind = self.state.get("kind")
        if kind == "werner":
            return 2
        if kind == "isotropic":
            return int(self.state.get("d", 0)) or None
        if kind == "schmidt":
            return len(self.state.get("lambdas", ())) or None
        return None

    def _n_inputs(self) -> int:
        if self.measurements is None:
            return 2  # see-saw always optimizes two measurements here
        if self.measurements.get("kind") == "mub":
            return int(self.measurements.get("count", 2))
        return 2

    def sweep_values(self) -> list[float]:
        if self.sweep is None:
            return [float(self.state.get("v", self.eta))]
        return [
            float(v)
            for v in np.linspace(self.sweep["start"], self.sweep["stop"], int(self.sweep["points"]))
        ]

    def at_parameter(self, value: float) -> "ExperimentConfig":
        """Config specialized to one sweep point (sweep removed)."""
        if self.sweep is None:
            return self
        if self.sweep["parameter"] == "v":
            state = dict(self.state, v=value)
            return replace(self, state=state, sweep=None)
        return replace(self, eta=value, sweep=None)

    def build_state(self) -> np.ndarray:
        kind = self.state["kind"]
        if kind == "werner":
            return scen.werner_state(float(self.state["v"]))
        if kind == "isotropic":
            return scen.isotropic_state(int(self.state["d"]), float(self.state["v"]))
        return scen.schmidt_state([float(x) for x in self.state["lambdas"]])

    def build_measurements(self) -> list[Povm]:
        m = self.measurements
        povms = scen.standard_povms(
            m["kind"],
            d=int(m["d"]) if "d" in m else None,
            count=int(m["count"]) if "count" in m else None,
        )
        if self.eta < 1.0:
            povms = [scen.apply_loss(p, float(self.eta)) for p in povms]
        return povms

    def build_bob_povm(self) -> Povm:
        kind = self.bob_measurement["kind"]
        d = self.build_state().shape[0] // self._alice_dim()
        if kind in ("pauli_x", "pauli_z"):
            if d != 2:
                raise ConfigError("bob_measurement", f"{kind} needs a qubit on the trusted side")
            return scen.pauli_xz()[0 if kind == "pauli_x" else 1]
        if kind == "computational":
            return basis_povm(np.eye(d, dtype=complex))
        fourier = scen.fourier_and_computational(d)[0]
        return fourier


def presets() -> dict[str, ExperimentConfig]:
    """Named configurations reproducing the standard curves."""
    theta = np.pi / 7
    return {
        "fig2": ExperimentConfig(
            kind="steering_local",
            state={"kind": "werner", "v": 1.0},
            measurements={"kind": "pauli_xz"},
            sweep={"parameter": "v", "start": 0.6, "stop": 1.0, "points": 41},
            out="fig2.csv",
        ),
        "fig3_qubit": ExperimentConfig(
            kind="steering_local",
            state={"kind": "werner", "v": 1.0},
            measurements={"kind": "pauli_xz"},
            sweep={"parameter": "eta", "start": 0.4, "stop": 1.0, "points": 31},
            out="fig3_qubit.csv",
        ),
        "fig4_qutrit_loss": ExperimentConfig(
            kind="steering_local",
            state={"kind": "isotropic", "d": 3, "v": 1.0},
            measurements={"kind": "mub", "d": 3, "count": 4},
            sweep={"parameter": "eta", "start": 0.4, "stop": 1.0, "points": 13},
            out="fig4_qutrit_loss.csv",
        ),
        "fig_global": ExperimentConfig(
            kind="steering_global",
            state={"kind": "werner", "v": 1.0},
            measurements={"kind": "pauli_xz"},
            bob_measurement={"kind": "pauli_x"},
            sweep={"parameter": "v", "start": 0.5, "stop": 1.0, "points": 21},
            out="fig_global.csv",
        ),
        "fig_pm": ExperimentConfig(
            kind="prepare_measure",
            state={"kind": "isotropic", "d": 3, "v": 1.0},
            measurements={"kind": "mub", "d": 3, "count": 2},
            sweep={"parameter": "v", "start": 0.1, "stop": 1.0, "points": 10},
            out="fig_pm.csv",
        ),
        "fig6_seesaw": ExperimentConfig(
            kind="seesaw",
            state={"kind": "schmidt", "lambdas": [float(np.cos(theta) ** 2), float(np.sin(theta) ** 2)]},
            seeds=(0, 1, 2, 3, 4),
            max_iters=50,
            tol=1e-6,
            out="fig6_seesaw.csv",
        ),
    }


def _certify_point(config: ExperimentConfig) -> certify_mod.CertificationResult:
    rho = config.build_state()
    povms = config.build_measurements()
    if config.kind == "steering_local":
        return certify_mod.certify_local(scen.assemblage_from(rho, povms), int(config.x_star))
    if config.kind == "steering_global":
        return certify_mod.certify_global(
            scen.assemblage_from(rho, povms), int(config.x_star), config.build_bob_povm()
        )
    if config.kind == "prepare_measure":
        return certify_mod.certify_pm(rho, povms, int(config.x_star))
    raise ConfigError("kind", f"{config.kind} is not a certification kind")


def _sweep_worker(payload: str) -> dict:
    data = json.loads(payload)
    config = ExperimentConfig.from_json(data["config"])
    point = config.at_parameter(data["value"])
    start = time.perf_counter()
    result = _certify_point(point)
    wall_ms = (time.perf_counter() - start) * 1000.0
    return {
        "parameter": data["value"],
        "p_guess": result.p_guess,
        "h_min": result.h_min,
        "gap": result.gap,
        "status": str(result.status),
        "wall_ms": wall_ms,
        "functional": result.functional.to_json(),
        "x_star": result.x_star,
    }


def _write_rows(out: str, rows: list[dict]) -> str:
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "p_guess", "h_min", "gap", "status", "wall_ms"])
        for row in rows:
            writer.writerow([
                f"{row['parameter']:.12g}",
                f"{row['p_guess']:.12g}",
                f"{row['h_min']:.12g}",
                f"{row['gap']:.12g}",
                row["status"],
                f"{row['wall_ms']:.3f}",
            ])
    sidecar = os.path.splitext(out)[0] + ".json"
    with open(sidecar, "w") as fh:
        json.dump(
            [{k: row[k] for k in ("parameter", "p_guess", "h_min", "gap", "status", "x_star", "functional")}
             for row in rows],
            fh,
        )
    return sidecar


def run_sweep(config: ExperimentConfig, *, jobs: int = 1, out: str | None = None) -> tuple[list[dict], int]:
    """Execute every sweep point; returns (rows, exit_code) and writes the
    CSV and its JSON sidecar when an output path is configured."""
    config.validate()
    values = config.sweep_values()
    payloads = [json.dumps({"config": config.to_json(), "value": v}) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_worker, payloads))
    else:
        rows = [_sweep_worker(p) for p in payloads]
    rows.sort(key=lambda r: r["parameter"])
    target = out or config.out
    if target:
        _write_rows(target, rows)
    code = 0 if all(r["status"] == "optimal" for r in rows) else 3
    return rows, code


def run_seesaw(config: ExperimentConfig, *, out: str | None = None) -> tuple[dict, int]:
    """Multi-seed see-saw restarts; keeps the best trace and writes its CSV
    plus a JSON sidecar with one summary per seed."""
    config.validate()
    rho = config.build_state()
    d = int(np.sqrt(rho.shape[0]))
    ceiling = float(np.log2(d)) if config.state["kind"] == "schmidt" else None
    traces = {}
    for seed in config.seeds:
        initial = _random_povms(d, 2, d, int(seed))
        traces[int(seed)] = _seesaw_loop(
            rho,
            initial,
            int(config.x_star),
            eta=float(config.eta),
            max_iters=int(config.max_iters),
            tol=float(config.tol),
            ceiling=ceiling,
        )
    best_seed = max(traces, key=lambda s: traces[s].final.h_min)
    best = traces[best_seed]
    target = out or config.out
    sidecar = None
    if target:
        best.to_csv(target)
        sidecar = os.path.splitext(target)[0] + ".json"
        with open(sidecar, "w") as fh:
            json.dump(
                {
                    "best_seed": best_seed,
                    "seeds": {
                        str(s): {
                            "final_h_min": t.final.h_min,
                            "iterations": len(t.iterations),
                            "converged": t.converged,
                            "stop_reason": str(t.stop_reason),
                        }
                        for s, t in traces.items()
                    },
                    "functional": best.final.functional.to_json(),
                },
                fh,
            )
    summary = {
        "best_seed": best_seed,
        "final_h_min": best.final.h_min,
        "iterations": len(best.iterations),
        "converged": best.converged,
        "stop_reason": str(best.stop_reason),
    }
    return summary, 0


def run_lhs(config: ExperimentConfig, *, out: str | None = None) -> tuple[dict, int]:
    config.validate()
    asm = scen.assemblage_from(config.build_state(), config.build_measurements())
    result = scen.lhs_test(asm)
    payload = {"is_lhs": bool(result.is_lhs), "robustness": float(result.robustness)}
    target = out or config.out
    if target:
        with open(target, "w") as fh:
            json.dump(payload, fh)
    return payload, 0


def run(config: ExperimentConfig, *, jobs: int = 1, out: str | None = None) -> int:
    """Execute the configured experiment; returns the process exit code."""
    if config.kind == "lhs":
        return run_lhs(config, out=out)[1]
    if config.kind == "seesaw":
        return run_seesaw(config, out=out)[1]
    return run_sweep(config, jobs=jobs, out=out)[1]


# -- command line ---------------------------------------------------------


def _error_json(code: int, message: str) -> int:
    print(json.dumps({"error": message, "exit_code": code}), file=sys.stderr)
    return code


def _load_config(args) -> ExperimentConfig:
    if args.preset and args.config:
        raise ConfigError("preset", "give either --preset or --config, not both")
    if args.preset:
        table = presets()
        if args.preset not in table:
            raise ConfigError("preset", f"unknown preset {args.preset!r}; have {sorted(table)}")
        config = table[args.preset]
    elif args.config:
        try:
            with open(args.config) as fh:
                config = ExperimentConfig.from_json(json.load(fh))
        except FileNotFoundError:
            raise ConfigError("config", f"no such file: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
    else:
        raise ConfigError("config", "need --preset NAME or --config PATH")

    if args.x_star is not None:
        config = replace(config, x_star=args.x_star)
    if args.eta is not None:
        config = replace(config, eta=args.eta)
    if args.v is not None:
        if config.state.get("kind") == "schmidt":
            raise ConfigError("state.v", "schmidt states have no visibility to override")
        config = replace(config, state=dict(config.state, v=args.v))
    if args.seeds is not None:
        try:
            seeds = tuple(int(s) for s in args.seeds.split(","))
        except ValueError:
            raise ConfigError("seeds", f"expected comma-separated integers, got {args.seeds!r}") from None
        config = replace(config, seeds=seeds)
    if args.out is not None:
        config = replace(config, out=args.out)
    config.validate()
    return config


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a JSON experiment configuration")
    parser.add_argument("--preset", help="named preset (see the presets command)")
    parser.add_argument("--x-star", dest="x_star", type=int, default=None, help="target input index")
    parser.add_argument("--eta", type=float, default=None, help="detection efficiency override")
    parser.add_argument("--v", type=float, default=None, help="visibility override")
    parser.add_argument("--seeds", default=None, help="comma-separated seeds (see-saw restarts)")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="sweep worker processes")
    parser.add_argument("--out", default=None, help="output path override")
    parser.add_argument("--json", action="store_true", help="print results as JSON to stdout")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="steercert", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("certify", "run a single certification point"),
        ("sweep", "run a parameter sweep and write CSV + JSON artifacts"),
        ("seesaw", "optimize measurements by see-saw restarts"),
        ("lhs", "test an observed assemblage for a local-hidden-state model"),
        ("presets", "list named presets"),
    ):
        p = sub.add_parser(name, help=help_text)
        if name != "presets":
            _add_common(p)
        else:
            p.add_argument("--json", action="store_true", help="print full preset configs")
    args = parser.parse_args(argv)

    if args.command == "presets":
        table = presets()
        if args.json:
            print(json.dumps({name: cfg.to_json() for name, cfg in table.items()}, indent=2))
        else:
            for name in table:
                print(name)
        return 0

    try:
        config = _load_config(args)
    except ConfigError as exc:
        return _error_json(2, str(exc))

    try:
        if args.command == "certify":
            result = _certify_point(replace(config, sweep=None))
            payload = result.to_json()
            if args.out:
                with open(args.out, "w") as fh:
                    json.dump(payload, fh)
            if args.json or not args.out:
                print(json.dumps(payload))
            return 0 if payload["status"] == "optimal" else 3
        if args.command == "sweep":
            if config.kind in ("seesaw", "lhs"):
                return _error_json(2, "kind: sweep needs a certification kind")
            rows, code = run_sweep(config, jobs=max(1, args.jobs), out=args.out)
            if args.json:
                print(json.dumps([{k: r[k] for k in ("parameter", "p_guess", "h_min", "gap", "status")} for r in rows]))
            return code
        if args.command == "seesaw":
            if config.kind != "seesaw":
                return _error_json(2, f"kind: expected seesaw, got {config.kind}")
            summary, code = run_seesaw(config, out=args.out)
            if args.json:
                print(json.dumps(summary))
            return code
        if args.command == "lhs":
            payload, code = run_lhs(config, out=args.out)
            if args.json or not (args.out or config.out):
                print(json.dumps(payload))
            return code
    except ConfigError as exc:
        return _error_json(2, str(exc))
    except (certify_mod.CertificationError, RuntimeError) as exc:
        return _error_json(3, str(exc))
    raise AssertionError("unreachable command dispatch")


def entrypoint() -> None:  # console script
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    entrypoint()

"""Command-line entry point (``syncgain``)."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import lmi, synth
from .bench import (
    DEFAULT_HORIZON,
    FALLBACK_HORIZON,
    ScenarioConfig,
    emit_table,
    emit_trajectories,
    load_gain,
    plant_preset,
    resolve_seed,
    run_benchmark,
    save_gain,
)
from .errors import ConfigError, SyncGainError
from .graph import WeightedDigraph, laplacian, nonzero_spectrum, preset
from .linalg import Plant, matrix_2norm, real_embedding
from .sim import DEFAULT_SEED, DEFAULT_STEP, fit_decay, initial_state, integrate, write_trajectory_csv
from .verify import check_mu_uges, estimate_rate

EXIT_OK, EXIT_CONFIG, EXIT_FAILURE = 0, 1, 2


def _load_graph(arg: str) -> WeightedDigraph:
    path = Path(arg)
    if path.suffix == ".json" or path.is_file():
        try:
            return WeightedDigraph.from_json(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read graph: {exc}") from exc
    try:
        return preset(arg)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc


def _load_plant(arg: str) -> tuple[Plant, str]:
    path = Path(arg)
    if path.suffix == ".json" or path.is_file():
        try:
            obj = json.loads(path.read_text())
            return Plant(obj["A"], obj["B"]), path.stem
        except (OSError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"cannot load plant: {exc}") from exc
    return plant_preset(arg), arg


def _algorithm_config(args) -> synth.AlgorithmConfig:
    try:
        return synth.AlgorithmConfig(kbar=args.kbar, tolerance=args.tolerance, backend=args.backend)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_spectrum(args) -> int:
    g = _load_graph(args.graph)
    s = nonzero_spectrum(laplacian(g))
    if args.json:
        print(json.dumps({"eigenvalues": [[lam.real, lam.imag] for lam in s]}))
    else:
        for lam in s:
            print(f"{lam.real:.10g} {lam.imag:+.10g}j")
    return EXIT_OK


def cmd_synth(args) -> int:
    p, _ = _load_plant(args.plant)
    g = _load_graph(args.graph)
    res = synth.design(args.method, p, g, _algorithm_config(args))
    if res is None:
        print(f"{args.method}: infeasible", file=sys.stderr)
        return EXIT_FAILURE
    mu_hat = estimate_rate(p, nonzero_spectrum(laplacian(g)), res.gain).mu_hat
    print(f"method={args.method} mu_star={res.mu_star:.6g} mu_hat={mu_hat:.6g} "
          f"gain_norm={matrix_2norm(res.gain):.6g} iterations={res.iterations} time_s={res.wall_time:.3g}")
    if args.out:
        save_gain(res.gain, args.out)
    return EXIT_OK if mu_hat > 0 else EXIT_FAILURE


def cmd_verify(args) -> int:
    p, _ = _load_plant(args.plant)
    g = _load_graph(args.graph)
    K = load_gain(args.gain)
    s = nonzero_spectrum(laplacian(g))
    ok = check_mu_uges(p, s, K, args.mu, method=args.method, backend=args.backend)
    print(f"mu={args.mu:g} {'holds' if ok else 'fails'} (mu_hat={estimate_rate(p, s, K).mu_hat:.6g})")
    return EXIT_OK if ok else EXIT_FAILURE


def cmd_simulate(args) -> int:
    p, name = _load_plant(args.plant)
    g = _load_graph(args.graph)
    K = load_gain(args.gain)
    horizon = args.horizon if args.horizon is not None else DEFAULT_HORIZON.get(name, FALLBACK_HORIZON)
    seed = resolve_seed(args.seed)
    traj = integrate(initial_state(g.n_agents, p.n, seed), p, K, laplacian(g), horizon, args.step)
    write_trajectory_csv(traj, args.out, args.states)
    if len(traj.times) > 1:
        fit = fit_decay(traj)
        print(f"samples={len(traj.times)} dist0={traj.distances[0]:.6g} distT={traj.distances[-1]:.6g} "
              f"rate={fit.rate:.6g} M={fit.M:.4g}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig()
    rows = run_benchmark(cfg)
    emit_table(rows, args.out or sys.stdout, timing=not args.no_timing)
    if args.traj_prefix:
        emit_trajectories(cfg, rows, args.traj_prefix, include_states=args.states)
    failed = [r for r in rows if r.status != "ok"]
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_dump_sdp(args) -> int:
    p, _ = _load_plant(args.plant)
    g = _load_graph(args.graph)
    s = nonzero_spectrum(laplacian(g))
    n = p.n
    if args.kind == "synthesis":
        mults = [(np.eye(2 * n), args.alpha * np.eye(2 * n))] * s.nu
        prob = lmi.assemble_synthesis(p, s, mults, args.mu, args.kbar)
    elif args.kind == "common-q":
        prob = lmi.assemble_common_q(p, list(s), args.mu, args.kbar)
    else:
        if not args.gain:
            raise ConfigError("--gain is required for the lyapunov check")
        K = load_gain(args.gain)
        prob = lmi.assemble_lyap_check(real_embedding(p, K, s.eigenvalues[args.mode]), args.mu)
    text = prob.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="syncgain", description="Synchronizing gain design for linear multi-agent networks.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def design_opts(sp):
        sp.add_argument("--kbar", type=float, default=20.0, help="bound on the gain 2-norm")
        sp.add_argument("--tolerance", type=float, default=1e-3)
        sp.add_argument("--backend", choices=sorted(lmi.BACKENDS), default=lmi.DEFAULT_BACKEND)

    sp = sub.add_parser("spectrum", help="nonzero Laplacian eigenvalues (one per conjugate pair)")
    sp.add_argument("graph", help="preset name or graph JSON file")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("synth", help="design a gain")
    sp.add_argument("--method", choices=synth.METHODS, required=True)
    sp.add_argument("--plant", required=True, help="osc, x29 or plant JSON file")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--out", help="write the gain as JSON")
    design_opts(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("verify", help="check mu-synchronization of a gain")
    sp.add_argument("--gain", required=True)
    sp.add_argument("--mu", type=float, required=True)
    sp.add_argument("--plant", default="x29")
    sp.add_argument("--graph", default="circ10")
    sp.add_argument("--method", choices=("spectral", "lyapunov"), default="spectral")
    sp.add_argument("--backend", choices=sorted(lmi.BACKENDS), default=lmi.DEFAULT_BACKEND)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("simulate", help="integrate the closed loop and write a trajectory CSV")
    sp.add_argument("--gain", required=True)
    sp.add_argument("--plant", required=True)
    sp.add_argument("--graph", required=True)
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--step", type=float, default=DEFAULT_STEP)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--states", action="store_true", help="include per-agent state columns")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("bench", help="run the benchmark table")
    sp.add_argument("--config", help="scenario config JSON (defaults: all presets, all methods)")
    sp.add_argument("--out", help="summary CSV path (stdout if omitted)")
    sp.add_argument("--traj-prefix", help="write trajectory CSVs with this path prefix")
    sp.add_argument("--states", action="store_true")
    sp.add_argument("--no-timing", action="store_true", help="leave time_s blank for byte-reproducible output")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("dump-sdp", help="write an assembled SDP as JSON (debugging)")
    sp.add_argument("--kind", choices=("synthesis", "common-q", "lyapunov"), default="synthesis")
    sp.add_argument("--plant", required=True)
    sp.add_argument("--graph", required=True)
    sp.add_argument("--mu", type=float, default=0.0)
    sp.add_argument("--kbar", type=float, default=20.0)
    sp.add_argument("--alpha", type=float, default=1.0, help="multiplier W = alpha I for the synthesis kind")
    sp.add_argument("--gain", help="gain JSON for the lyapunov kind")
    sp.add_argument("--mode", type=int, default=0, help="eigenvalue index for the lyapunov kind")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_dump_sdp)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SyncGainError, KeyError, ValueError) as exc:
        # config problems exit 1; numerical failures of a single design exit 2
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, ConfigError) or not isinstance(exc, SyncGainError):
            return EXIT_CONFIG
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

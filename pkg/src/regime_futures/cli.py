"""Command-line entry point: ``regime-futures <command> --config FILE --out DIR``.

Commands: ``price``, ``ce``, ``phi``, ``strategy``, ``simulate``. Exit status
is 0 on success, 2 for config/validation errors and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .config import RunConfig, load_config
from .errors import InvalidInput, NumericalError
from .hjb import alpha_vector, ce_curve, solve_phi
from .io import write_csv
from .pricing_gbm import GbmPricer
from .pricing_xou import (default_grid, max_rel_diff_central, price_fdm, price_fst,
                          price_identical_kappa)
from .simulate import prepare_market, run_experiment
from .strategy import optimal_positions

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _t_grid(end: float, n: int) -> np.ndarray:
    return np.linspace(0.0, end, n)


def cmd_price(cfg: RunConfig, out: Path) -> list:
    spec = cfg.spec()
    written = []
    if cfg.kind == "rs-gbm":
        for k, T in enumerate(cfg.maturities, start=1):
            pricer = GbmPricer(spec, T)
            t = _t_grid(T, cfg.curve_points)
            g = pricer.g_vector(t)
            tt, reg = np.repeat(t, cfg.m), np.tile(np.arange(1, cfg.m + 1), t.size)
            f = pricer.price(tt, cfg.x_ref, reg)
            written.append(write_csv(out / f"gbm_curve_T{k}.csv", ["t", "regime", "g", "F"],
                                     [tt, reg, g.reshape(-1), f]))
        return written

    builders = {"fdm": lambda T: price_fdm(spec, T, default_grid(spec, T, cfg.n_x, cfg.n_t)),
                "fst": lambda T: price_fst(spec, T, default_grid(spec, T, cfg.n_x, cfg.n_t)),
                "separable": lambda T: price_identical_kappa(spec, T, max(cfg.n_t, 1000))}
    report = []
    for k, T in enumerate(cfg.maturities, start=1):
        grid = default_grid(spec, T, cfg.n_x, cfg.n_t)
        stride = cfg.surface_stride
        layers = sorted(set(range(0, grid.n_t + 1, stride)) | {grid.n_t})
        xs = grid.x[::stride]
        surfaces = {}
        for method in cfg.methods:
            surf = builders[method](T)
            surfaces[method] = surf
            t = np.repeat(grid.t[layers], cfg.m * xs.size)
            reg = np.tile(np.repeat(np.arange(1, cfg.m + 1), xs.size), len(layers))
            x = np.tile(xs, len(layers) * cfg.m)
            written.append(write_csv(
                out / f"surface_{method}_T{k}.csv", ["t", "x", "regime", "F", "dF_dx"],
                [t, x, reg, surf.price(t, x, reg), surf.price_dx(t, x, reg)]))
        names = list(surfaces)
        for a in range(len(names)):
            for b in range(a + 1, len(names)):
                diff = max_rel_diff_central(surfaces[names[a]], surfaces[names[b]], grid)
                report.append((T, names[a], names[b], diff))
    if report:
        path = out / "method_comparison.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("maturity,method_a,method_b,max_rel_diff_central\n")
            for T, a, b, d in report:
                fh.write(f"{T:.17g},{a},{b},{d:.17g}\n")
        written.append(path)
    return written


def cmd_ce(cfg: RunConfig, out: Path) -> list:
    measures = cfg.measures()
    horizons = _t_grid(cfg.ce_horizon or cfg.horizon, cfg.ce_points)
    cols = [[], [], [], []]
    for gamma in cfg.gammas:
        ce = ce_curve(cfg.zeta, measures, gamma, cfg.w0, horizons)
        cols[0].append(np.repeat(horizons, cfg.m))
        cols[1].append(np.tile(np.arange(1, cfg.m + 1), horizons.size))
        cols[2].append(np.full(ce.size, gamma))
        cols[3].append(ce.reshape(-1))
    cols = [np.concatenate(c) for c in cols]
    return [write_csv(out / "ce.csv", ["horizon", "regime", "gamma", "certainty_equivalent"], cols)]


def cmd_phi(cfg: RunConfig, out: Path) -> list:
    measures = cfg.measures()
    phi = solve_phi(measures.q_gen, alpha_vector(cfg.zeta, measures), cfg.horizon)
    t = _t_grid(cfg.horizon, cfg.curve_points)
    vals = phi(t)
    return [write_csv(out / "phi.csv", ["t", "regime", "phi"],
                      [np.repeat(t, cfg.m), np.tile(np.arange(1, cfg.m + 1), t.size), vals.reshape(-1)])]


def cmd_strategy(cfg: RunConfig, out: Path, seed=None) -> list:
    market = prepare_market(cfg.sim_config(seed=seed))
    t = _t_grid(cfg.horizon, cfg.curve_points)
    xs = np.asarray(cfg.strategy_x if cfg.strategy_x is not None else (cfg.x0,))
    T, R, X = np.meshgrid(t, np.arange(1, cfg.m + 1), xs, indexing="ij")
    T, R, X = T.reshape(-1), R.reshape(-1), X.reshape(-1)
    pos, det = optimal_positions(market.pricers, market.spec, market.phi, T, X, R, cfg.gamma,
                                 with_det=True)
    header = ["t", "regime", "x"] + [f"pi_{k}" for k in range(1, cfg.m + 1)] + ["det_gamma"]
    return [write_csv(out / "positions.csv", header, [T, R, X, *pos.T, det])]


def _path_columns(cfg: RunConfig, bundle):
    m = cfg.m
    header = (["t", "regime", "spot"] + [f"F_{k}" for k in range(1, m + 1)]
              + [f"pi_{k}" for k in range(1, m + 1)] + ["wealth", "abs_det_gamma"])
    cols = [bundle.t, bundle.regime, bundle.spot, *bundle.futures.T, *bundle.positions.T,
            bundle.wealth, bundle.abs_det_gamma]
    return header, cols


def cmd_simulate(cfg: RunConfig, out: Path, seed=None, workers=None, layout=None) -> tuple:
    sim = cfg.sim_config(seed=seed, workers=workers)
    batch = run_experiment(sim)
    layout = layout or cfg.layout
    written = []
    if layout == "long":
        header, parts = None, []
        for p, bundle in enumerate(batch):
            header, cols = _path_columns(cfg, bundle)
            parts.append([np.full(bundle.t.size, p)] + cols)
        cols = [np.concatenate(c) for c in zip(*parts)]
        written.append(write_csv(out / "paths.csv", ["path"] + header, cols))
    else:
        for p, bundle in enumerate(batch):
            header, cols = _path_columns(cfg, bundle)
            written.append(write_csv(out / "paths" / f"path_{p:06d}.csv", header, cols))
    wt = batch.terminal("wealth")
    summary = {"terminal_wealth_mean": float(wt.mean()),
               "terminal_wealth_std": float(wt.std(ddof=1)) if wt.size > 1 else 0.0,
               "paths": int(batch.n_paths)}
    return written, summary


def _manifest(out: Path, command: str, cfg: RunConfig, seed: int, wall: float, files, extra=None):
    data = {
        "command": command,
        "config_sha256": cfg.digest(),
        "config": cfg.to_dict(),
        "seed": seed,
        "versions": {"regime_futures": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__,
                     "pyyaml": yaml.__version__},
        "wall_time_s": wall,
        "outputs": sorted(str(Path(f).relative_to(out)) for f in files),
    }
    if extra:
        data["summary"] = extra
    out.mkdir(parents=True, exist_ok=True)
    (out / f"manifest_{command}.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regime-futures", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("price", "futures price curves or surfaces"),
                           ("ce", "certainty-equivalent curves"),
                           ("phi", "phi(t) from the reduced HJB system"),
                           ("strategy", "optimal futures positions on a (t, regime, x) grid"),
                           ("simulate", "simulate spot/futures/position/wealth paths under P")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", help="output directory (default: output.dir from the config)")
        p.add_argument("--seed", type=int, help="override simulation.seed")
        if name == "simulate":
            p.add_argument("--workers", type=int, help="worker threads (output is identical)")
            p.add_argument("--layout", choices=("per-path", "long"),
                           help="one CSV per path or a single long-format file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        cfg = load_config(args.config)
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise InvalidInput("--seed must be an unsigned 64-bit integer")
        if getattr(args, "workers", None) is not None and args.workers < 1:
            raise InvalidInput("--workers must be >= 1")
        out = Path(args.out if args.out else cfg.out_dir)
        seed = cfg.seed if args.seed is None else args.seed
        summary = None
        if args.command == "price":
            files = cmd_price(cfg, out)
        elif args.command == "ce":
            files = cmd_ce(cfg, out)
        elif args.command == "phi":
            files = cmd_phi(cfg, out)
        elif args.command == "strategy":
            files = cmd_strategy(cfg, out, seed=seed)
        else:
            files, summary = cmd_simulate(cfg, out, seed=seed, workers=args.workers,
                                          layout=args.layout)
        _manifest(out, args.command, cfg, seed, time.perf_counter() - started, files, summary)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Config-driven command line front end.

Commands:

    nllab check-conditions <config.toml>   kernel conditions K1/K2/K3
    nllab solve <config.toml>              time-step and write snapshots
    nllab regularity <config.toml>         one named regularity experiment
    nllab version

Flags: --out DIR (overrides [output].dir), --seed N (overrides
[experiment].seed), --threads N.  Exit codes: 0 success, 2 invalid
config, 3 numerical failure.

Configs are TOML; all numeric output is written as shortest round-trip
decimals so reruns with identical config and seed are byte-identical.
Every run writes a manifest run.json naming its outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:      # python < 3.11
    import tomli as tomllib

from . import __version__
from .conditions import check_k1, check_k2_sample, check_k3
from .errors import (ConfigError, InvalidInput, InvalidSpec, NumericalFailure,
                     QuadratureFailure)
from .grid import Grid
from .lab import (ScalingParams, harnack_constant_smoke, harnack_experiment,
                  heat_kernel_profile, holder_experiment, log_level_sets,
                  moser_check, poincare_experiment, scaling_check,
                  strong_harnack_probe)
from .measures import (MeasureSpec, robust_normalization, symbol_normalization)
from .operator import assemble
from .solver import IvpConfig, initial_hat, make_test_supersolutions, solve

REGULARITY_NAMES = ("harnack", "hoelder", "scaling", "poincare", "loglemma",
                    "moser", "heatkernel", "strongharnack")


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def load_config(path: str) -> dict:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = tomllib.loads(raw.decode("utf-8"))
    except Exception as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    cfg["_hash"] = hashlib.sha256(raw).hexdigest()
    return cfg


def build_measure(cfg: dict) -> MeasureSpec:
    try:
        block = cfg["measure"]
        kind = block["kind"]
        d = int(block["d"])
        alpha = float(block["alpha"])
    except KeyError as exc:
        raise ConfigError(f"missing [measure] key: {exc}") from exc
    norm = block.get("normalization", "raw")
    if norm == "raw":
        nu = 1.0
    elif norm == "robust":
        nu = robust_normalization(alpha)
    elif norm == "symbol":
        nu = symbol_normalization(d, alpha)
    elif isinstance(norm, (int, float)):
        nu = float(norm)
    else:
        raise ConfigError(f"unknown normalization {norm!r}")
    try:
        if kind == "stable":
            return MeasureSpec.stable(d, alpha, normalization=nu)
        if kind == "axes":
            return MeasureSpec.axes(d, alpha, normalization=nu)
        if kind == "cusp":
            return MeasureSpec.cusp(alpha, float(block["s"]), normalization=nu)
        if kind == "tabulated":
            return MeasureSpec.tabulated_from_file(
                block["table"], d=d, alpha=alpha,
                head_exponent=block.get("head_exponent"),
                tail_exponent=block.get("tail_exponent"), normalization=nu)
    except (InvalidSpec, InvalidInput, KeyError, OSError) as exc:
        raise ConfigError(f"invalid measure spec: {exc}") from exc
    raise ConfigError(f"unknown measure kind {kind!r}")


def build_grid(cfg: dict, spec: MeasureSpec) -> Grid:
    block = cfg.get("grid", {})
    try:
        h = float(block["h"])
    except KeyError as exc:
        raise ConfigError("missing [grid].h") from exc
    domain = float(block.get("domain_radius", 2.0))
    box = float(block.get("box_radius", 4.0 * domain))
    try:
        return Grid(spec.d, h, box, domain)
    except InvalidInput as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


class RunWriter:
    """Serializes all file writes of one run and builds the manifest."""

    def __init__(self, outdir: Path, config_hash: str, seed):
        self.outdir = outdir
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.config_hash = config_hash
        self.seed = seed
        self.outputs = []
        self.t_start = time.time()

    def csv(self, name: str, header, rows):
        path = self.outdir / name
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(x) for x in row])
        self.outputs.append(name)
        return path

    def json(self, name: str, payload: dict):
        path = self.outdir / name
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        self.outputs.append(name)
        return path

    def manifest(self):
        payload = {
            "config_hash": self.config_hash,
            "version": __version__,
            "seed": self.seed,
            "wall_clock_s": time.time() - self.t_start,
            "outputs": sorted(self.outputs),
        }
        with open(self.outdir / "run.json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"not serializable: {type(obj)}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_check_conditions(cfg: dict, writer: RunWriter, seed, threads) -> None:
    spec = build_measure(cfg)
    block = cfg.get("conditions", {})
    rho_list = [float(r) for r in block.get("rho_list", [0.25, 0.5, 1.0, 2.0])]
    dh_list = [float(x) for x in block.get("dh_list", [1 / 8, 1 / 16])]
    delta = float(block.get("delta", min(0.5, spec.alpha / 2.0)))
    budget = block.get("lambda_budget")
    budget = float(budget) if budget is not None else None

    k1 = check_k1(spec, rho_list, lambda_budget=budget)
    writer.csv("k1.csv", ["rho", "value"],
               zip(k1.scales, k1.measured_values))

    k2_reports = check_k2_sample(spec, dh_list, lambda_budget=budget)
    rows = []
    for name, rep in k2_reports.items():
        for dh, up, lo in zip(rep.scales, rep.extras["uppers"],
                              rep.extras["lowers"]):
            rows.append([name, dh, up, lo])
    writer.csv("k2.csv", ["ball", "dh", "upper_ratio", "lower_ratio"], rows)
    lam_k2 = max(rep.lambda_measured for rep in k2_reports.values())

    k3 = check_k3(spec, delta, c0_budget=budget)
    if not k3.divergent:
        writer.csv("k3.csv", ["x_norm", "value"],
                   zip(k3.scales, k3.measured_values))

    passes = {
        "k1": k1.passed if budget is not None else None,
        "k2": (lam_k2 <= budget) if budget is not None else None,
        "k3": (not k3.divergent and (budget is None
                                     or k3.c0_measured <= budget)),
    }
    writer.json("conditions_summary.json", {
        "kind": spec.kind, "d": spec.d, "alpha": spec.alpha,
        "effective_order": k1.extras["effective_order"],
        "k1_lambda": k1.lambda_measured,
        "k2_lambda": lam_k2,
        "k3_c0": None if k3.divergent else k3.c0_measured,
        "k3_divergent": k3.divergent,
        "delta": delta,
        "lambda_budget": budget,
        "passes": passes,
    })


def _initial_from_config(block: dict, grid: Grid):
    kind = block.get("initial", "zero")
    if kind == "hat":
        return initial_hat(grid)
    if kind == "zero":
        return np.zeros(grid.n_nodes)
    if kind == "constant":
        return np.full(grid.n_nodes, float(block.get("constant", 1.0)))
    if kind == "bump":
        w = float(block.get("bump_width", 0.25))
        r2 = np.sum(grid.coords ** 2, axis=1)
        return np.exp(-r2 / w ** 2)
    raise ConfigError(f"unknown initial data {kind!r}")


def _exterior_from_config(block: dict):
    kind = block.get("exterior", "zero")
    if kind == "zero":
        return lambda t, pts: np.zeros(len(np.atleast_2d(pts)))
    if kind == "constant":
        c = float(block.get("exterior_constant", 0.0))
        return lambda t, pts: np.full(len(np.atleast_2d(pts)), c)
    raise ConfigError(f"unknown exterior data {kind!r}")


def cmd_solve(cfg: dict, writer: RunWriter, seed, threads) -> None:
    spec = build_measure(cfg)
    grid = build_grid(cfg, spec)
    op = assemble(spec, grid)
    sblock = cfg.get("solver", {})
    run = cfg.get("solve", {})
    t0 = float(run.get("t0", 0.0))
    t1 = float(run.get("t1", 1.0))
    dt = float(sblock.get("dt", grid.h))
    theta = float(sblock.get("theta", 1.0))
    tol = float(sblock.get("tolerance", 1e-10))
    f_const = run.get("forcing_constant")
    f = None
    if f_const is not None:
        fc = float(f_const)
        f = lambda t, pts: np.full(len(np.atleast_2d(pts)), fc)
    ivp = IvpConfig(op=op, t0=t0, t1=t1, dt=dt, theta=theta,
                    u0=_initial_from_config(run, grid),
                    g=_exterior_from_config(run), f=f, rtol=tol,
                    maxiter=int(sblock.get("maxiter", 5000)))
    u = solve(ivp)
    snapshot_times = run.get("snapshot_times", [t1])
    coord_cols = ["x"] if spec.d == 1 else ["x1", "x2"]
    written = []
    for t in snapshot_times:
        k = u.time_index(float(t))
        rows = [list(grid.coords[i]) + [u.values[k, i]]
                for i in range(grid.n_nodes)]
        name = f"snapshot_{k:05d}.csv"
        writer.csv(name, coord_cols + ["u"], rows)
        written.append({"t": float(t), "file": name})
    writer.json("solve_summary.json", {
        "kind": spec.kind, "alpha": spec.alpha, "d": spec.d,
        "h": grid.h, "dt": dt, "theta": theta,
        "t0": t0, "t1": t1, "snapshots": written,
        "final_mass": float(u.values[-1].sum()) * grid.h ** grid.d,
        "final_center": float(u.values[-1, grid.node_at(np.zeros(spec.d))]),
    })


def cmd_regularity(cfg: dict, writer: RunWriter, seed, threads) -> None:
    block = cfg.get("experiment", {})
    name = block.get("name")
    if name not in REGULARITY_NAMES:
        raise ConfigError(
            f"experiment name must be one of {', '.join(REGULARITY_NAMES)}")
    spec = build_measure(cfg)
    gblock = cfg.get("grid", {})
    h = float(gblock.get("h", 1 / 32))
    dt = float(cfg.get("solver", {}).get("dt", h))
    samples = int(block.get("samples", 20))
    if seed is None:
        raise ConfigError("randomized experiments need a seed "
                          "([experiment].seed or --seed)")

    if name == "harnack":
        box = float(gblock.get("box_radius", 8.0))
        domain = float(gblock.get("domain_radius", 2.0))
        rows = []
        if block.get("include_constant_sample"):
            q0 = harnack_constant_smoke(spec, h, dt, box, domain)
            rows.append(["const", q0])
        rep = harnack_experiment(spec, h=h, dt=dt, seed=seed, count=samples,
                                 box_radius=box, domain_radius=domain,
                                 threads=threads)
        rows.extend(enumerate(rep.quotients))
        writer.csv("harnack.csv", ["sample", "quotient"], rows)
        payload = {"alpha": rep.alpha, "h": rep.h, "dt": rep.dt,
                   "max_quotient": rep.max_quotient,
                   "degenerate": rep.degenerate, "samples": samples}
        if block.get("refine"):
            fine = harnack_experiment(spec, h=h / 2, dt=dt, seed=seed,
                                      count=samples, box_radius=box,
                                      domain_radius=domain, threads=threads)
            payload["max_quotient_refined"] = fine.max_quotient
            payload["refinement_drift"] = abs(
                fine.max_quotient - rep.max_quotient) / fine.max_quotient
        writer.json("harnack.json", payload)

    elif name == "hoelder":
        rep = holder_experiment(spec, h=h, dt=dt, seed=seed)
        writer.json("hoelder.json", {
            "beta": rep.beta, "raw_slope": rep.raw_slope, "eta": rep.eta,
            "residual": rep.residual, "sup_norm": rep.sup_norm,
            "n_pairs": rep.n_pairs, "seminorm_zero": rep.seminorm_zero})

    elif name == "scaling":
        r = float(block.get("r", 0.5))
        tau = float(block.get("tau", 0.0))
        xi = np.asarray(block.get("xi", [0.0] * spec.d), dtype=float)
        params = ScalingParams(r=r, xi=xi, tau=tau,
                               alpha=float(spec.alpha))
        w = float(block.get("bump_width", 0.02))
        u0 = lambda pts: np.exp(
            -np.sum(np.atleast_2d(pts) ** 2, axis=1) / w)
        g0 = lambda t, pts: np.zeros(len(np.atleast_2d(pts)))
        res = scaling_check(spec, params, h, dt, u0, g0)
        writer.csv("scaling.csv",
                   ["r", "discrepancy", "matrix_rel_diff", "eps_scheme"],
                   [[r, res["discrepancy"], res["matrix_rel_diff"],
                     res["eps_scheme"]]])
        writer.json("scaling.json", res)

    elif name == "poincare":
        alphas = [float(a) for a in block.get("alphas", [1.0, 1.5, 1.9])]
        rep = poincare_experiment(spec.d, alphas, h, seed=seed,
                                  count=samples, kind=spec.kind)
        writer.csv("poincare.csv", ["alpha", "max_ratio"],
                   zip(rep.alphas, rep.max_ratios))
        writer.json("poincare.json", {
            "alphas": rep.alphas, "max_ratios": rep.max_ratios,
            "overall_max": rep.overall_max, "degenerate": rep.degenerate})

    elif name in ("loglemma", "moser"):
        grid = Grid(spec.d, h, float(gblock.get("box_radius", 8.0)),
                    float(gblock.get("domain_radius", 2.0)))
        op = assemble(spec, grid)
        batch = make_test_supersolutions(op, seed, samples, dt,
                                         threads=threads)
        alpha = spec.alpha
        eps = float(block.get("floor", 1e-3))
        if name == "loglemma":
            rows = []
            for k, u in enumerate(batch):
                out = log_level_sets(u, 0.0, alpha, eps=eps)
                rows.append([k, out["a"], out["sup_neg"], out["sup_pos"]])
            writer.csv("loglemma.csv", ["sample", "a", "sup_neg", "sup_pos"],
                       rows)
            sup_all = [max(r[2], r[3]) for r in rows]
            writer.json("loglemma.json", {
                "max_product": max(sup_all),
                "median_product": float(np.median(sup_all)),
                "samples": samples, "floor": eps})
        else:
            p_list = [float(p) for p in block.get("p_list", [0.25, 0.5, 1.0])]
            r_in = float(block.get("r", 0.5))
            r_out = float(block.get("R", 1.0))
            rows = []
            for k, u in enumerate(batch):
                for p in p_list:
                    for mode in ("NegStep", "NegIter"):
                        rep = moser_check(u, mode, p, r_in, r_out, 0.0,
                                          alpha, eps)
                        rows.append([k, mode, p, rep.implied_constant])
                kappa = 1.0 + alpha / spec.d
                p_pos = 0.8 / kappa
                rep = moser_check(u, "PosIter", p_pos, r_in, r_out, 0.0,
                                  alpha, eps)
                rows.append([k, "PosIter", p_pos, rep.implied_constant])
            writer.csv("moser.csv", ["sample", "mode", "p", "implied_constant"],
                       rows)
            by_mode = {}
            for _, mode, _, c in rows:
                by_mode.setdefault(mode, []).append(c)
            writer.json("moser.json", {
                mode: {"max": max(v), "median": float(np.median(v))}
                for mode, v in by_mode.items()})

    elif name == "heatkernel":
        t_list = [float(t) for t in block.get("t_list", [0.25, 0.5, 1.0])]
        box = float(gblock.get("box_radius", 8.0))
        res = heat_kernel_profile(spec, h=h, dt=dt, t_list=t_list,
                                  box_radius=box)
        payload = dict(res)
        if block.get("double_box"):
            res2 = heat_kernel_profile(spec, h=h, dt=dt, t_list=t_list,
                                       box_radius=2.0 * box)
            payload["masses_doubled_box"] = res2["masses"]
            payload["mass_drop_first_t"] = abs(
                res2["masses"][0] - res["masses"][0]) / res2["masses"][0]
        writer.csv("heatkernel.csv",
                   ["t", "on_diag", "far_min", "far_max", "mass"],
                   zip(res["t_list"], res["on_diag"], res["far_min"],
                       res["far_max"], res["masses"]))
        payload.pop("t_list", None)
        writer.json("heatkernel.json", payload)

    elif name == "strongharnack":
        widths = [float(w) for w in block.get("widths", [1.0, 0.35, 0.1])]
        res = strong_harnack_probe(
            spec, widths, h=h,
            box_radius=float(gblock.get("box_radius", 4.0)),
            domain_radius=float(gblock.get("domain_radius", 2.0)),
            dt=float(block.get("stationary_dt", 1.0)),
            tol=float(block.get("stationary_tol", 1e-7)))
        writer.csv("strongharnack.csv", ["width", "ratio", "converged"],
                   zip(res["widths"], res["ratios"], res["converged"]))
        ratios = res["ratios"]
        writer.json("strongharnack.json", {
            "widths": res["widths"], "ratios": ratios,
            "strictly_increasing": all(a < b for a, b in zip(ratios, ratios[1:])),
            "all_converged": res["all_converged"]})


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nllab",
        description="numerical laboratory for nonlocal parabolic equations")
    sub = parser.add_subparsers(dest="command")
    for cname in ("check-conditions", "solve", "regularity"):
        p = sub.add_parser(cname)
        p.add_argument("config")
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
    sub.add_parser("version")
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if args.command == "version":
        print(f"nllab {__version__}")
        return 0

    try:
        cfg = load_config(args.config)
        seed = args.seed
        if seed is None:
            seed = cfg.get("experiment", {}).get("seed")
            seed = int(seed) if seed is not None else None
        outdir = Path(args.out or cfg.get("output", {}).get("dir", "out"))
        writer = RunWriter(outdir, cfg["_hash"], seed)
        if args.command == "check-conditions":
            cmd_check_conditions(cfg, writer, seed, args.threads)
        elif args.command == "solve":
            cmd_solve(cfg, writer, seed, args.threads)
        else:
            cmd_regularity(cfg, writer, seed, args.threads)
        writer.manifest()
        return 0
    except (ConfigError, InvalidSpec, InvalidInput) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, QuadratureFailure) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``qdiscern <command> [--config FILE] [flags]``.

Exit status: 0 on success, 2 on configuration or input errors, 3 when an
exact enumeration is infeasible.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields

from .config import ExperimentConfig, load_config
from .errors import ConfigError, EnumerationTooLarge, QDiscernError
from .experiments import (
    AnomalyRow,
    SweepRow,
    discernibility_sweep,
    measurement_optimality_study,
    resolve_measurements,
    sudden_scaling_study,
    uncertainty_condition,
    vertex_anomaly_study,
)
from .hypothesis_testing import gamma_max, stein_exponent
from .information import (
    classical_fisher_analytic,
    classical_fisher_fd,
    quantum_fisher,
    quantum_fisher_energy,
)
from .measurement import outcome_distribution
from .reports import write_report

COMMANDS = ("sudden", "fisher", "power", "stein", "condition", "anomaly")
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file (default: bundled qubit example)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="report CSV path; metadata goes to <out>.meta.yaml")
    common.add_argument("--format", choices=["csv"])
    common.add_argument("--threads", type=int, help="worker cap (env QDISCERN_THREADS)")
    common.add_argument("--threshold", type=float, help="cut-off for 'much less than one'")
    common.add_argument("--alpha", type=float, help="test size alpha*")
    common.add_argument("--dt", type=_floats, help="comma-separated dt values")
    common.add_argument("--n", type=_ints, help="comma-separated copy counts")
    common.add_argument("--trials", type=int, help="random POVMs for the fisher command")
    common.add_argument("--samples", type=int, help="Monte Carlo fallback sample count")
    common.add_argument("--p0", type=_floats, help="stein: null distribution")
    common.add_argument("--p1", type=_floats, help="stein: alternative distribution")
    common.add_argument("--normalize-state", action="store_true",
                        help="rescale a non-normalized initial state instead of failing")
    common.add_argument("--dump-config", action="store_true",
                        help="print the effective config as YAML and exit")

    p = argparse.ArgumentParser(prog="qdiscern", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "sudden": "exact vs perturbative sudden-approximation error and its residual order",
        "fisher": "classical Fisher information per measurement against J^s",
        "power": "exact most-powerful-test power over a (dt, n) grid",
        "stein": "(beta_n*)^(1/n) against exp(-D)",
        "condition": "evaluate 2 n dt^2 Var(H) / hbar^2 against the threshold",
        "anomaly": "Stein exponent over the Fisher prediction for the pi and SLD measurements",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return p


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("QDISCERN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"QDISCERN_THREADS: not an integer: {env!r}")
    return 1


def apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threshold is not None:
        cfg.threshold = args.threshold
    if args.alpha is not None:
        cfg.alpha = args.alpha
    if args.dt is not None:
        cfg.dt = args.dt
    if args.n is not None:
        cfg.n = args.n
    if args.trials is not None:
        cfg.trials = args.trials
    if args.samples is not None:
        cfg.monte_carlo_samples = args.samples
    if args.format is not None:
        cfg.output["format"] = args.format
    if args.out is not None:
        cfg.output["path"] = args.out
    if args.normalize_state:
        cfg.normalize_state = True
    if (args.p0 is None) != (args.p1 is None):
        raise ConfigError("--p0 and --p1 must be given together")
    if args.p0 is not None:
        cfg.stein = {"p0": args.p0, "p1": args.p1}
    cfg.validate()
    return cfg


def _header(cls) -> list[str]:
    return [f.name for f in fields(cls)]


def cmd_sudden(cfg: ExperimentConfig, threads: int):
    model = cfg.build_model()
    rep = sudden_scaling_study(model, [t for t in cfg.dt if t > 0])
    rows = [(r.dt, r.exact, r.perturbative, r.residual) for r in rep.rows]
    meta = {"fitted_slope": rep.slope, "fit_dt": rep.fit_dt, "order_at_least_3": rep.order_ok}
    slope = "n/a" if rep.slope is None else f"{rep.slope:.6g}"
    summary = [
        f"sudden approximation, model {model.label}",
        f"  residual log-log slope: {slope} (order >= 3: {rep.order_ok})",
    ]
    return ["dt", "w_exact", "w_perturbative", "residual"], rows, meta, summary


def cmd_fisher(cfg: ExperimentConfig, threads: int):
    model = cfg.build_model()
    psi0, H0, hbar = model.psi0, model.H0, model.hbar
    meas = resolve_measurements(cfg.build_measurements(), model, cfg.seed)
    Js = quantum_fisher(psi0, H0, hbar)
    Je = quantum_fisher_energy(psi0, H0, hbar)

    def row(item):
        label, povm = item
        an = classical_fisher_analytic(psi0, H0, hbar, povm)
        fd = classical_fisher_fd(psi0, H0, hbar, povm, cfg.fd_step)
        return (label, len(povm), an.value, an.method, fd.value, Js, Je, Js - an.value)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = list(pool.map(row, meas))
    meta = {"quantum_fisher": Js, "quantum_fisher_energy": Je}
    summary = [f"Fisher information at t0, model {model.label}",
               f"  J^s (4 Tr rho drho^2) = {Js:.10g}   J^s (4 Var H / hbar^2) = {Je:.10g}"]
    for r in rows:
        summary.append(f"  {r[0]:>10}: J_M = {r[2]:.10g} [{r[3]}], gap = {r[7]:.3g}")
    if cfg.trials > 0:
        opt = measurement_optimality_study(model, cfg.trials, cfg.seed)
        meta["random_trials"] = cfg.trials
        meta["random_max_fisher"] = opt.max_random
        meta["random_violations"] = opt.violations
        summary.append(f"  {cfg.trials} random POVMs: max J_M = {opt.max_random:.10g}, "
                       f"violations of J_M <= J^s: {opt.violations}")
    header = ["measurement", "outcomes", "fisher_analytic", "method", "fisher_fd",
              "quantum_fisher", "quantum_fisher_energy", "gap"]
    return header, rows, meta, summary


def cmd_power(cfg: ExperimentConfig, threads: int):
    model = cfg.build_model()
    res = discernibility_sweep(
        model, cfg.build_measurements(), cfg.n, cfg.dt, cfg.alpha, cfg.seed,
        threads, cfg.monte_carlo_samples,
    )
    summary = [f"most powerful test power, model {model.label}, alpha* = {cfg.alpha}"]
    for r in res.rows:
        summary.append(f"  {r.measurement:>10} dt={r.dt:<8.4g} n={r.n:<4d} power={r.exact_power:.6f} "
                       f"gamma_max={r.gamma_max_prediction:.6f}")
    return _header(SweepRow), res.rows, res.metadata, summary


def cmd_stein(cfg: ExperimentConfig, threads: int):
    if cfg.stein is not None:
        pairs = [("user", cfg.stein["p0"], cfg.stein["p1"])]
    else:
        model = cfg.build_model()
        meas = resolve_measurements(cfg.build_measurements(), model, cfg.seed)
        pairs = []
        for label, povm in meas:
            p0 = outcome_distribution(model.psi0, povm)
            for dt in sorted(set(cfg.dt)):
                if dt > 0:
                    p1 = outcome_distribution(model.state_at(dt), povm)
                    pairs.append((f"{label}@dt={dt:g}", p0.probs, p1.probs))

    def run(pair):
        src, p0, p1 = pair
        res = stein_exponent(p0, p1, cfg.alpha, cfg.n)
        return [(src, n, root, res.reference, res.kl) for n, root in res.rows]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = [r for chunk in pool.map(run, pairs) for r in chunk]
    summary = [f"Stein exponent, alpha* = {cfg.alpha}"]
    for src, n, root, ref, _ in rows:
        summary.append(f"  {src:>16} n={n:<5d} beta^(1/n)={root:.6f}  exp(-D)={ref:.6f}")
    header = ["source", "n", "beta_root", "reference_exp_minus_D", "kl"]
    return header, rows, {"alpha_star": cfg.alpha}, summary


def cmd_condition(cfg: ExperimentConfig, threads: int):
    model = cfg.build_model()
    dH2 = model.energy_variance
    rows = []
    for n in sorted(set(cfg.n)):
        for dt in sorted(set(cfg.dt)):
            value, ok = uncertainty_condition(n, dt, dH2, model.hbar, cfg.threshold)
            g, weak = gamma_max(n, dH2, dt, model.hbar)
            rows.append((n, dt, value, ok, g, weak))
    summary = [f"discernibility condition 2 n dt^2 Var(H)/hbar^2 <= {cfg.threshold:g}, "
               f"Var(H) = {dH2:.6g}"]
    for n, dt, value, ok, _, _ in rows:
        summary.append(f"  n={n:<6d} dt={dt:<8.4g} value={value:.6g}  "
                       f"{'indistinguishable' if ok else 'distinguishable'}")
    meta = {"energy_variance": dH2, "threshold": cfg.threshold}
    header = ["n", "dt", "value", "satisfied", "gamma_max", "gamma_max_weak"]
    return header, rows, meta, summary


def cmd_anomaly(cfg: ExperimentConfig, threads: int):
    model = cfg.build_model()
    rows = vertex_anomaly_study(model, [t for t in cfg.dt if t > 0], cfg.n, cfg.alpha)
    summary = [f"Stein exponent / Fisher prediction, model {model.label}"]
    seen = set()
    for r in rows:
        if (r.measurement, r.dt) in seen:
            continue
        seen.add((r.measurement, r.dt))
        summary.append(f"  {r.measurement:>4} dt={r.dt:<8.4g} D={r.kl:.6g}  "
                       f"(J/2)dt^2={r.fisher_prediction:.6g}  ratio={r.stein_ratio:.6f}")
    return _header(AnomalyRow), rows, {"alpha_star": cfg.alpha}, summary


HANDLERS = {
    "sudden": cmd_sudden,
    "fisher": cmd_fisher,
    "power": cmd_power,
    "stein": cmd_stein,
    "condition": cmd_condition,
    "anomaly": cmd_anomaly,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config, args.normalize_state), args)
        threads = resolve_threads(args.threads)
    except ConfigError as exc:
        print(f"qdiscern: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dump_config:
        sys.stdout.write(cfg.dump())
        return 0
    out = cfg.output.get("path") or f"qdiscern-{args.command}.csv"
    try:
        header, rows, meta, summary = HANDLERS[args.command](cfg, threads)
    except EnumerationTooLarge as exc:
        print(f"qdiscern: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (QDiscernError, ValueError) as exc:
        print(f"qdiscern: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    meta = {"command": args.command, "seed": cfg.seed, **meta, "config": cfg.to_dict()}
    side = write_report(out, header, rows, meta)
    print("\n".join(summary))
    print(f"report: {out}\nmetadata: {side}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

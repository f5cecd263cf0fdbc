"""Command line entry point.

Every subcommand reads and writes artifacts in ``--out``; missing upstream
artifacts (history, model, tree) are produced on the fly from ``--seed`` so
any command can be run on a fresh directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from treehvac import plots
from treehvac.building import generate_weather, load_disturbance_csv, write_disturbance_csv
from treehvac.config import Config, load_config
from treehvac.dynamics import DynamicsModel, evaluate_model, fit_dynamics
from treehvac.extraction import (
    build_decision_dataset, fit_cart, noise_sweep, read_decision_csv, write_decision_csv,
)
from treehvac.harness import (
    BaselineController, EpisodeAborted, RSController, TreeController, bench_latency, collect_history,
    compute_metrics, data_efficiency_sweep, decision_functions, history_inputs, read_transitions_csv,
    run_closed_loop, stochasticity_diagnostic, write_transitions_csv,
)
from treehvac.tree import TreePolicy
from treehvac.verifier import verify_and_correct

log = logging.getLogger("treehvac")

BASELINE_NOTE = ("baseline = rule-based thermostat at the rounded comfort bounds while occupied, "
                 "(15,30) otherwise; its setpoints are an assumption of this package")


class Run:
    """Artifact paths and lazily built upstream products for one output directory."""

    def __init__(self, cfg: Config, seed: int, out: Path, plots_enabled: bool = True):
        self.cfg = cfg.with_seed(seed)
        self.seed = seed
        self.out = out
        self.plots = plots_enabled
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out / name

    # upstream artifacts

    def history(self):
        p = self.path("history.csv")
        if not p.exists():
            self.collect()
        return read_transitions_csv(p)

    def collect(self):
        c = self.cfg
        records, _ = collect_history(c.run.history_days, c.run.season, self.seed, c.plant, c.reward,
                                     c.schedule, c.run.epsilon)
        write_transitions_csv(records, self.path("history.csv"))
        log.info("wrote %d transitions to %s", len(records), self.path("history.csv"))
        return records

    def model(self) -> DynamicsModel:
        p = self.path("model.json")
        if not p.exists():
            self.train()
        return DynamicsModel.load(p)

    def train(self) -> DynamicsModel:
        hist = self.history()
        model = fit_dynamics(hist, self.cfg.train)
        model.save(self.path("model.json"))
        rmse = evaluate_model(model, hist)
        _write_json(self.path("model_stats.json"), {"train_rmse_degC": rmse, "records": len(hist),
                                                    "final_loss": model.loss_history[-1],
                                                    "initial_loss": model.loss_history[0]})
        log.info("trained dynamics model, train RMSE %.4f degC", rmse)
        return model

    def inputs(self) -> np.ndarray:
        return history_inputs(self.history())

    def decisions(self, n: int):
        p = self.path("decisions.csv")
        if p.exists():
            recs = read_decision_csv(p)
            if len(recs) >= n:
                return recs[:n]
        stats = {}
        c = self.cfg
        recs = build_decision_dataset(self.model(), self.inputs(), n, c.noise, c.mpc, c.reward, stats=stats)
        write_decision_csv(recs, p)
        _write_json(self.path("extract_stats.json"), stats)
        return recs

    def tree(self) -> TreePolicy:
        p = self.path("tree.json")
        if not p.exists():
            self.extract(self.cfg.run.n_decisions)
        return TreePolicy.load(p)

    def extract(self, n: int) -> TreePolicy:
        tree = fit_cart(self.decisions(n), self.cfg.cart)
        tree.save(self.path("tree.json"))
        log.info("fitted %r", tree)
        return tree

    def verified_tree(self) -> TreePolicy:
        p = self.path("tree_verified.json")
        if not p.exists():
            self.verify()
        return TreePolicy.load(p)

    def verify(self):
        fixed, report = verify_and_correct(self.tree(), self.model(), self.inputs(), self.cfg.verify)
        fixed.save(self.path("tree_verified.json"))
        report.save(self.path("verification_report.json"))
        return fixed, report

    def eval_trace(self, weather: str | None = None, days: int | None = None):
        if weather:
            return load_disturbance_csv(weather)
        c = self.cfg
        return generate_weather(days or c.run.eval_days, c.run.season, self.seed + 10_007,
                                schedule_cfg=c.schedule)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=str))


def _write_rows(path: Path, rows: list[dict]) -> None:
    if not rows:
        return
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def _policy(run: Run, name: str):
    c = run.cfg
    if name == "baseline":
        return BaselineController(c.reward.comfort)
    if name == "rs_mbrl":
        return RSController(run.model(), c.mpc, c.reward)
    if name == "tree":
        return TreeController(run.verified_tree())
    if name == "tree_unverified":
        return TreeController(run.tree())
    raise ValueError(f"unknown policy {name}")


def _episode(run: Run, policy_name: str, trace, label: str):
    c = run.cfg
    try:
        ep = run_closed_loop(_policy(run, policy_name), trace, c.plant, c.reward, seed=run.seed,
                             initial_temp=c.run.initial_temp)
    except EpisodeAborted as exc:
        exc.partial.write_csv(run.path(f"trace_{label}_partial.csv"))
        raise
    ep.write_csv(run.path(f"trace_{label}.csv"))
    m = compute_metrics(ep, c.reward.comfort)
    if run.plots:
        plots.plot_episode(ep, c.reward.comfort, run.path(f"trace_{label}.png"))
    return ep, m


# -- subcommands --------------------------------------------------------------

def cmd_simulate(run: Run, args):
    trace = run.eval_trace(args.weather, args.days)
    write_disturbance_csv(trace, run.path("weather.csv"))
    _, m = _episode(run, args.policy, trace, args.policy)
    _write_rows(run.path(f"metrics_{args.policy}.csv"), [{"policy": args.policy, **m.as_row()}])
    print(json.dumps({"policy": args.policy, **m.as_row()}, indent=2))


def cmd_collect(run: Run, args):
    recs = run.collect()
    print(f"{len(recs)} transitions -> {run.path('history.csv')}")


def cmd_train(run: Run, args):
    model = run.train()
    print(f"model -> {run.path('model.json')} (final loss {model.loss_history[-1]:.4g})")


def cmd_extract(run: Run, args):
    n = args.n or run.cfg.run.n_decisions
    tree = run.extract(n)
    print(f"{tree!r} from {n} decision records -> {run.path('tree.json')}")


def cmd_diagnose(run: Run, args):
    levels = [float(v) for v in args.levels.split(",")]
    hist = run.inputs()
    c = run.cfg
    other, _ = collect_history(c.run.history_days, c.run.season, run.seed + 1, c.plant, c.reward, c.schedule)
    ref = history_inputs(other)
    rows = noise_sweep(hist, levels, n_samples=args.samples, seed=run.seed, reference=ref)
    _write_rows(run.path("noise_diagnostics.csv"), rows)
    if run.plots:
        plots.plot_noise_sweep(rows, run.path("noise_diagnostics.png"))
    for r in rows:
        print(f"noise {r['noise_level']:.3f}: entropy {r['mean_entropy_bits']:.3f} bits, "
              f"JSD {r['mean_jsd']:.4f}")


def cmd_verify(run: Run, args):
    if args.strict:
        run.cfg.verify = replace(run.cfg.verify, strict=True)
    _, report = run.verify()
    print(json.dumps(report.to_dict(), indent=2))


def cmd_deploy(run: Run, args):
    trace = run.eval_trace(args.weather, args.days)
    name = "tree_unverified" if args.unverified else "tree"
    _, m = _episode(run, name, trace, name)
    _write_rows(run.path(f"metrics_{name}.csv"), [{"policy": name, **m.as_row()}])
    print(json.dumps({"policy": name, **m.as_row()}, indent=2))


def cmd_sweep(run: Run, args):
    sizes = [int(v) for v in args.sizes.split(",")]
    c = run.cfg
    records = run.decisions(max(sizes))
    rows = data_efficiency_sweep(run.model(), run.inputs(), sizes, run.eval_trace(args.weather, args.days),
                                 c.plant, c.reward, c.noise, c.mpc, c.cart, records=records)
    _write_rows(run.path("sweep.csv"), rows)
    if run.plots:
        plots.plot_sweep(rows, run.path("sweep.png"))
    for r in rows:
        print(f"n={r['n']:5d} ratio={r['performance_ratio']:.4f} nodes={r['tree_size']}")


def _bench_rows(run: Run, reps: int):
    c = run.cfg
    fns = decision_functions(run.verified_tree(), run.model(), c.mpc, c.reward)
    inputs = run.inputs()
    pick = np.random.default_rng(run.seed).choice(len(inputs), size=min(50, len(inputs)), replace=False)
    sample = [inputs[i] for i in pick]
    rows = []
    for name, fn in fns.items():
        r = reps if name != "rs_mbrl" else max(30, min(reps, 60))
        mean, std = bench_latency(fn, sample, warmup=5, reps=r)
        rows.append({"policy": name, "mean_ms": mean, "std_ms": std, "reps": r})
    return rows


def cmd_bench(run: Run, args):
    rows = _bench_rows(run, args.reps)
    _write_rows(run.path("latency.csv"), rows)
    for r in rows:
        print(f"{r['policy']:10s} {r['mean_ms']:10.4f} ms +/- {r['std_ms']:.4f}")


def cmd_compare(run: Run, args):
    trace = run.eval_trace(args.weather, args.days)
    write_disturbance_csv(trace, run.path("weather.csv"))
    metrics = {}
    for name in ("baseline", "rs_mbrl", "tree"):
        metrics[name] = _episode(run, name, trace, name)[1]
    latency = {r["policy"]: r for r in _bench_rows(run, args.reps)}
    rows = []
    for name, m in metrics.items():
        rows.append({"policy": name, "energy_kWh": round(m.total_energy_kWh, 3),
                     "comfort_rate": round(m.comfort_rate, 4),
                     "degree_hours": round(m.violation_degree_hours, 3),
                     "performance_ratio": round(m.performance_ratio, 4),
                     "latency_mean_ms": round(latency[name]["mean_ms"], 4),
                     "latency_std_ms": round(latency[name]["std_ms"], 4)})
    _write_rows(run.path("compare.csv"), rows)
    header = "| " + " | ".join(rows[0]) + " |"
    lines = [header, "|" + "---|" * len(rows[0])]
    lines += ["| " + " | ".join(str(v) for v in r.values()) + " |" for r in rows]
    lines += ["", f"Note: {BASELINE_NOTE}."]
    run.path("compare.md").write_text("\n".join(lines) + "\n")
    if run.plots:
        plots.plot_compare(metrics, run.path("compare.png"))
    print("\n".join(lines))


def cmd_stochasticity(run: Run, args):
    c = run.cfg
    trace = run.eval_trace(args.weather, 1 if args.days is None else args.days)
    pols = {"rs_mbrl": _policy(run, "rs_mbrl"), "tree": _policy(run, "tree")}
    seeds = range(1, args.runs + 1)
    diag = stochasticity_diagnostic(pols, trace, c.plant, c.reward, seeds)
    rows = []
    for t, ts in enumerate(trace.timestamps):
        row = {"timestamp": ts.isoformat()}
        for name, d in diag.items():
            heat = [ep.heat_sp[t] for ep in d["episodes"]]
            row[f"{name}_heat_mean"] = float(np.mean(heat))
            row[f"{name}_heat_std"] = float(d["heat_std"][t])
            row[f"{name}_cool_std"] = float(d["cool_std"][t])
        rows.append(row)
    _write_rows(run.path("stochasticity.csv"), rows)
    if run.plots:
        plots.plot_setpoint_spread(diag, trace, run.path("stochasticity.png"))
    for name, d in diag.items():
        print(f"{name}: {d['steps_with_spread']} of {len(trace)} steps with nonzero setpoint std "
              f"(max heat std {d['max_heat_std']:.3f})")


def build_parser() -> argparse.ArgumentParser:
    def common_flags(suppress: bool) -> argparse.ArgumentParser:
        # Global flags are accepted before or after the subcommand; the
        # subcommand copies use SUPPRESS so they never clobber earlier values.
        c = argparse.ArgumentParser(add_help=False)
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        c.add_argument("--config", type=Path, default=d(None), help="sectioned key=value config file")
        c.add_argument("--seed", type=int, default=d(0))
        c.add_argument("--out", type=Path, default=d(Path("out")))
        c.add_argument("--no-plots", action="store_true", default=d(False), help="skip PNG figures")
        c.add_argument("-v", "--verbose", action="store_true", default=d(False))
        return c

    common = common_flags(suppress=True)
    p = argparse.ArgumentParser(prog="treehvac", description=__doc__.splitlines()[0],
                                parents=[common_flags(suppress=False)])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, parents=[common])
        sp.set_defaults(func=fn)
        return sp

    def weather_opts(sp):
        sp.add_argument("--weather", help="disturbance CSV (default: synthetic)")
        sp.add_argument("--days", type=int, help="length of the synthetic trace")

    sp = add("simulate", cmd_simulate, "closed-loop run of one policy")
    sp.add_argument("--policy", choices=("baseline", "rs_mbrl", "tree", "tree_unverified"), default="baseline")
    weather_opts(sp)
    add("collect", cmd_collect, "synthesise the historical transition dataset")
    add("train-dynamics", cmd_train, "fit the dynamics model")
    sp = add("extract", cmd_extract, "build the decision dataset and fit the tree")
    sp.add_argument("-n", type=int, help="number of decision records")
    sp = add("diagnose-noise", cmd_diagnose, "entropy/JSD of augmented inputs across noise levels")
    sp.add_argument("--levels", default="0.01,0.02,0.05,0.09,0.15,0.2,0.3,0.4,0.5")
    sp.add_argument("--samples", type=int, default=20000)
    sp = add("verify", cmd_verify, "path verification, correction and safe-probability estimate")
    sp.add_argument("--strict", action="store_true", help="also list comfort-straddling leaves for review")
    sp = add("deploy", cmd_deploy, "closed-loop run of the verified tree")
    sp.add_argument("--unverified", action="store_true")
    weather_opts(sp)
    sp = add("sweep", cmd_sweep, "data-efficiency sweep over decision-dataset sizes")
    sp.add_argument("--sizes", default="10,50,100,200,500")
    weather_opts(sp)
    sp = add("bench", cmd_bench, "per-decision latency of each policy")
    sp.add_argument("--reps", type=int, default=200)
    sp = add("compare", cmd_compare, "baseline vs rs_mbrl vs tree table")
    sp.add_argument("--reps", type=int, default=200)
    weather_opts(sp)
    sp = add("stochasticity", cmd_stochasticity, "setpoint spread over repeated seeded runs")
    sp.add_argument("--runs", type=int, default=10)
    weather_opts(sp)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except (KeyError, ValueError, OSError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return 2
    run = Run(cfg, args.seed, args.out, plots_enabled=not args.no_plots)
    try:
        args.func(run, args)
    except EpisodeAborted as exc:
        print(f"error: plant diverged: {exc}", file=sys.stderr)
        return 2
    _write_json(run.path("config_used.json"), {"seed": args.seed, "command": args.command,
                                                **{k: asdict(v) for k, v in run.cfg.__dict__.items()}})
    return 0


if __name__ == "__main__":
    sys.exit(main())

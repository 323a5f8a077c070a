"""Command line experiment runner.

Usage: ``qsasep VERB [--config FILE] [flags]`` with VERB one of
simulate, phase, sweep, burgers, couple, entropy, oracle.

Flags override config fields; ``--emit-config`` prints the resolved
config and exits.  Exit status is 0 on success, 1 on configuration
errors and 2 when a requested assertion fails.  Diagnostics go to
standard error as one JSON object per line.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import coupling, engine, experiments, observables, output
from .burgers import quasi_static_sweep
from .config import ConfigError, ExperimentConfig, config_hash, load_config, schedule_from_json
from .master import MasterEquation, all_states, bernoulli_product
from .rates import recommended_block_width, validate_scaling
from .theory import quasi_static_profile, stationary_product_density

VERBS = ("simulate", "phase", "sweep", "burgers", "couple", "entropy", "oracle")
ORACLE_TOL = 1e-10


def _diag(kind: str, message: str, **extra) -> None:
    print(json.dumps({"status": "error", "kind": kind, "message": message, **extra}), file=sys.stderr)


# ---------------------------------------------------------------------------
# argument parsing


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("config")
    g.add_argument("--config", help="JSON experiment config")
    g.add_argument("--emit-config", action="store_true", help="print the resolved config and exit")
    g.add_argument("--output", "-o", help="output directory")
    g.add_argument("--seed", type=int)
    g.add_argument("--replicas", type=int)
    g.add_argument("--cadence", type=float, help="snapshot spacing in macroscopic time")
    g.add_argument("--initial", help="initial density, 'empty', 'full' or a bitstring")
    g.add_argument("--z", type=float, dest="confidence_z", help="z threshold for statistical checks")
    g.add_argument("--assert", dest="assert_stats", action="store_true",
                   help="also fail (exit 2) on statistical checks")
    m = p.add_argument_group("model")
    m.add_argument("--N", type=int)
    m.add_argument("--a", type=float)
    m.add_argument("--pbar", type=float, dest="p_bar")
    m.add_argument("--T", type=float)
    m.add_argument("--family", choices=("liggett", "reversible"))
    m.add_argument("--rho-minus", type=float)
    m.add_argument("--rho-plus", type=float)
    m.add_argument("--sigma", type=float)
    m.add_argument("--sigma-tilde", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsasep", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("simulate", help="simulate replicas and emit trajectories and observables")
    _common(p)

    p = sub.add_parser("phase", help="predicted bulk state for given boundary densities")
    _common(p)
    p.add_argument("--theta-tol", type=float, default=1e-12)

    p = sub.add_parser("sweep", help="simulated bulk state against the oracle over a grid")
    _common(p)
    p.add_argument("--grid-minus", type=_float_list, help="comma-separated left densities")
    p.add_argument("--grid-plus", type=_float_list, help="comma-separated right densities")
    p.add_argument("--theta-margin", type=float)
    p.add_argument("--pass-rate", type=float)

    p = sub.add_parser("burgers", help="vanishing-viscosity sweep of the regularised equation")
    _common(p)
    p.add_argument("--epsilons", type=_float_list)
    p.add_argument("--M", type=int)

    p = sub.add_parser("couple", help="coupled pair with ordered boundary rates")
    _common(p)
    p.add_argument("--upper-rho-minus", type=float)
    p.add_argument("--upper-rho-plus", type=float)

    p = sub.add_parser("entropy", help="boundary entropy production across system sizes")
    _common(p)
    p.add_argument("--n-values", type=_int_list)
    p.add_argument("--pair", choices=("kruzkov", "lower", "upper"))
    p.add_argument("--psi", choices=("bump", "plateau"))

    p = sub.add_parser("oracle", help="exact master equation for small N")
    _common(p)
    p.add_argument("--n", type=int, help="number of sites (overrides model.N)")
    p.add_argument("--t", type=float, help="also evolve to this time")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then the config file, then command-line flags."""
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    d = cfg.to_dict()
    model, run = d["model"], d["run"]
    for key in ("N", "a", "p_bar", "T", "family", "rho_minus", "rho_plus", "sigma", "sigma_tilde"):
        v = getattr(args, key, None)
        if v is not None:
            model[key] = v
    if getattr(args, "n", None) is not None:
        model["N"] = args.n
    for key in ("output", "seed", "replicas", "cadence", "confidence_z"):
        v = getattr(args, key, None)
        if v is not None:
            run[key] = v
    if args.initial is not None:
        try:
            run["initial"] = float(args.initial)
        except ValueError:
            run["initial"] = args.initial
    verb = args.verb
    if verb in ("sweep", "burgers", "couple", "entropy", "oracle"):
        sect = d.setdefault(verb, {})
        if verb == "sweep":
            for key, flag in (("rho_minus", "grid_minus"), ("rho_plus", "grid_plus"),
                              ("theta_margin", "theta_margin"), ("pass_rate", "pass_rate")):
                if getattr(args, flag) is not None:
                    sect[key] = getattr(args, flag)
        elif verb == "burgers":
            for key in ("epsilons", "M"):
                if getattr(args, key) is not None:
                    sect[key] = getattr(args, key)
        elif verb == "couple":
            if sect.get("upper") is None:
                sect["upper"] = dict(model)
            upper = sect["upper"]
            if args.upper_rho_minus is not None:
                upper["rho_minus"] = args.upper_rho_minus
            if args.upper_rho_plus is not None:
                upper["rho_plus"] = args.upper_rho_plus
        elif verb == "entropy":
            for key, flag in (("N_values", "n_values"), ("pair", "pair"), ("psi", "psi")):
                if getattr(args, flag) is not None:
                    sect[key] = getattr(args, flag)
        elif verb == "oracle" and args.t is not None:
            sect["t"] = args.t
    return ExperimentConfig.from_dict(d)


# ---------------------------------------------------------------------------
# verbs; each returns (summary, exact checks, statistical checks, files, extra)


def _cadence(cfg: ExperimentConfig) -> float | None:
    if cfg.run.cadence is not None:
        return cfg.run.cadence
    return cfg.model.T / 20 if cfg.model.T > 0 else None


def _simulate_one(args):
    spec, initial, seed, r, cadence = args
    return engine.run(spec, initial=initial, seed=seed, replica=r, cadence=cadence)


def _group_currents(trajs, groups: int):
    spec = trajs[0].spec
    times = trajs[0].times
    N = spec.N
    groups = min(groups, N + 1)
    gid = np.minimum((np.arange(N + 1) * groups) // (N + 1), groups - 1)
    sizes = np.bincount(gid, minlength=groups)
    dt = np.diff(times)
    per = []
    for tr in trajs:
        dh = np.diff(tr.h, axis=0).astype(float)
        sums = np.zeros((dh.shape[0], groups))
        np.add.at(sums.T, gid, dh.T)
        per.append(sums / sizes / (spec.speed * dt[:, None]))
    mean, se = observables._mean_se(per)
    windows = list(zip(times[:-1].tolist(), times[1:].tolist()))
    return windows, mean, se


def verb_simulate(cfg: ExperimentConfig, out: Path):
    spec = cfg.model.to_spec()
    run = cfg.run
    args = [(spec, run.initial, run.seed, r, _cadence(cfg)) for r in range(run.replicas)]
    trajs = experiments.map_replicas(_simulate_one, args)
    files = [output.write_snapshots(out / "snapshots.csv", trajs), output.write_counts(out / "counts.csv", trajs)]
    times, mean, se = observables.density_profile(trajs, run.x_cells)
    files.append(output.write_density_profile(out / "density_profile.csv", times, mean, se))
    if len(times) > 1:
        windows, jm, js = _group_currents(trajs, run.x_cells)
        files.append(output.write_current(out / "current.csv", windows, jm, js))
    K = recommended_block_width(spec)
    if spec.N > 2 * K and len(times) > 1:
        hist = observables.young_histogram(trajs, K, run.x_cells, run.young_time_cells, run.young_bins)
        files.append(output.write_young(out / "young.csv", hist))
    exact = {"conservation": all(experiments.conservation_holds(tr) for tr in trajs)}
    events = sum(tr.event_count for tr in trajs)
    summary = f"simulate: N={spec.N} replicas={run.replicas} events={events}"
    return summary, exact, {}, files, {"events": events}


def verb_phase(cfg: ExperimentConfig, out: Path, theta_tol: float = 1e-12):
    m = cfg.model
    spec = m.to_spec()
    rm, rp = spec.boundary_densities(0.0)
    res = quasi_static_profile(float(rm), float(rp), m.p_bar, theta_tol)
    doc = res.as_dict()
    print(json.dumps(doc))
    path = out / "phase.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    note = " (literal table silent)" if res.literal_table_silent else ""
    return f"phase: {res.label} rho={res.rho} flux={res.flux}{note}", {}, {}, [path], {}


def verb_sweep(cfg: ExperimentConfig, out: Path):
    m, run, sw = cfg.model, cfg.run, cfg.section("sweep")
    base = m.to_spec()
    maker = (experiments.liggett_spec_maker if base.is_liggett else experiments.reversible_spec_maker)(
        m.N, m.a, m.p_bar, m.T
    )
    grid = [(a, b) for a in sw.rho_minus for b in sw.rho_plus]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        points, excluded = experiments.phase_sweep(
            maker, grid, run.replicas, run.seed, sw.theta_margin, sw.burn_in,
            sw.density_tol, sw.flux_tol, run.confidence_z, run.initial, workers=None,
        )
    for w in caught:
        print(json.dumps({"status": "warning", "message": str(w.message)}), file=sys.stderr)
    rows = [
        (p.rho_minus, p.rho_plus, p.label, p.density, p.density_se, p.density_oracle, p.density_z,
         p.flux, p.flux_se, p.flux_oracle, p.flux_z, int(p.ok))
        for p in points
    ]
    files = [output.write_csv(
        out / "sweep.csv",
        ("rho_minus", "rho_plus", "label", "density", "density_se", "density_oracle", "density_z",
         "flux", "flux_se", "flux_oracle", "flux_z", "pass"),
        rows,
    )]
    rate = sum(p.ok for p in points) / len(points) if points else math.nan
    summary = f"sweep: {len(points)} points, {len(excluded)} excluded, pass rate {rate:.3f}"
    return summary, {}, {"pass_rate": bool(rate >= sw.pass_rate)}, files, {"pass_rate": rate}


def verb_burgers(cfg: ExperimentConfig, out: Path):
    m, b = cfg.model, cfg.section("burgers")
    T = m.T if m.T > 0 else 1.0
    runs = quasi_static_sweep(
        b.epsilons, schedule_from_json(m.rho_minus, T), schedule_from_json(m.rho_plus, T),
        T, b.M, m.p_bar, b.records, b.initial, b.interior, b.settle,
    )
    files = list(output.write_burgers(out / "burgers.csv", out / "burgers_flux.csv", runs))
    dist = ", ".join(f"eps={r.epsilon:g}: rho {r.density_distance:.3g} flux {r.flux_distance:.3g}" for r in runs)
    extra = {"distances": [[r.epsilon, r.density_distance, r.flux_distance] for r in runs]}
    return f"burgers: {dist}", {}, {}, files, extra


def _couple_one(args):
    lo, hi, initial, seed, r, cadence = args
    return coupling.run_coupled(lo, hi, initial, seed, r, cadence)


def verb_couple(cfg: ExperimentConfig, out: Path):
    run, c = cfg.run, cfg.section("couple")
    lo = cfg.model.to_spec()
    hi = (c.upper or cfg.model).to_spec()
    args = [(lo, hi, c.initial, run.seed, r, _cadence(cfg)) for r in range(run.replicas)]
    trajs = experiments.map_replicas(_couple_one, args)
    files = [output.write_coupling(out / "coupling.csv", trajs)]
    exact = {
        "ordering": all(bool(np.all(tr.lower <= tr.upper)) for tr in trajs),
        "identity": all(tr.identity_holds() for tr in trajs),
    }
    stats = {}
    summary = f"couple: replicas={run.replicas}"
    try:
        rep = coupling.current_report(trajs, run.confidence_z)
    except ValueError as exc:
        summary += f" (no current comparison: {exc})"
    else:
        if run.replicas > 1:
            stats["current_inequality"] = rep.inequality_holds
        d, se = rep.difference
        summary += f" direction={rep.direction} J_upper-J_lower={d:.4g}+-{se:.2g}"
    return summary, exact, stats, files, {}


def verb_entropy(cfg: ExperimentConfig, out: Path):
    m, run, e = cfg.model, cfg.run, cfg.section("entropy")
    T = m.T
    pairs = {p.name: p for p in observables.builtin_pairs(m.p_bar)}
    pair = pairs[e.pair]
    psi = observables.bump(T) if e.psi == "bump" else observables.plateau(T)
    w = schedule_from_json(e.w if e.w is not None else m.rho_minus, T)
    records, means = [], []
    for N in e.N_values:
        mc = type(m)(**{**m.__dict__, "N": N})
        spec = mc.to_spec()
        K = validate_scaling(spec).K
        args = [(spec, run.initial, run.seed, r, _cadence(cfg)) for r in range(run.replicas)]
        trajs = experiments.map_replicas(_simulate_one, args)
        vals = [observables.boundary_entropy_production(tr, pair, psi, w, K).value for tr in trajs]
        records.extend((N, pair.name, r, v) for r, v in enumerate(vals))
        absv = np.abs(vals)
        se = absv.std(ddof=1) / math.sqrt(absv.size) if absv.size > 1 else math.nan
        means.append((float(absv.mean()), float(se)))
    files = [output.write_entropy(out / "entropy.csv", records)]
    stats = {}
    if len(means) > 1 and run.replicas > 1:
        stats["decay"] = all(
            a - b > math.hypot(sa, sb) for (a, sa), (b, sb) in zip(means[:-1], means[1:])
        )
    desc = ", ".join(f"N={N}: {a:.3g}+-{s:.2g}" for N, (a, s) in zip(e.N_values, means))
    return f"entropy: mean |X| {desc}", {}, stats, files, {"means": means}


def verb_oracle(cfg: ExperimentConfig, out: Path):
    spec = cfg.model.to_spec()
    o = cfg.section("oracle")
    me = MasterEquation(spec)
    pi = me.stationary()
    r = spec.rates_at(0.0)
    rho = stationary_product_density(r.alpha, r.beta, r.gamma, r.delta, spec.p) if spec.p > 0.5 else None
    states = all_states(spec.N)
    cols = [pi]
    header = ["state", "configuration", "stationary"]
    exact = {}
    summary = f"oracle: N={spec.N}"
    if rho is not None:
        prod = bernoulli_product(spec.N, rho)
        err = float(np.max(np.abs(pi - prod)))
        exact["bernoulli_product"] = err <= ORACLE_TOL
        cols.append(prod)
        header.append("product")
        summary += f" stationary vs Bernoulli({rho:.6g}) max error {err:.2e}"
    else:
        summary += " (no product stationary state for these rates)"
    if o.t is not None:
        init = o.initial if o.initial is not None else float(spec.boundary_densities(0.0)[0])
        cols.append(me.distribution(o.t, init))
        header.append("at_t")
    rows = (
        (k, "".join(map(str, states[k])), *(float(c[k]) for c in cols)) for k in range(len(pi))
    )
    files = [output.write_csv(out / "oracle.csv", header, rows)]
    print(json.dumps({"N": spec.N, "stationary": pi.tolist(), "product_density": rho}))
    return summary, exact, {}, files, {}


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.emit_config:
            print(cfg.dumps())
            return 0
        cfg.model.to_spec()
        if args.verb == "couple":
            (cfg.section("couple").upper or cfg.model).to_spec()
    except ConfigError as exc:
        _diag("config", str(exc))
        return 1
    except (TypeError, ValueError) as exc:
        _diag("config", str(exc))
        return 1

    out = Path(cfg.run.output)
    verb = globals()[f"verb_{args.verb}"]
    t0 = time.perf_counter()
    try:
        if args.verb == "phase":
            summary, exact, stats, files, extra = verb(cfg, out, args.theta_tol)
        else:
            summary, exact, stats, files, extra = verb(cfg, out)
    except (ValueError, engine.EventBudgetExceeded) as exc:
        _diag("config", str(exc))
        return 1
    except (AssertionError, coupling.OrderingError) as exc:
        _diag("assertion", str(exc))
        return 2
    wall = time.perf_counter() - t0

    (out / "config.json").write_text(cfg.dumps() + "\n")
    files.append(out / "config.json")
    output.write_manifest(out / "manifest.json", args.verb, config_hash(cfg), cfg.run.seed, wall,
                          files, {"checks": {**exact, **stats}, **extra})

    checks = dict(exact)
    if args.assert_stats:
        checks.update(stats)
    failed = sorted(k for k, ok in checks.items() if not ok)
    marks = " ".join(f"{k}={'pass' if ok else 'FAIL'}" for k, ok in {**exact, **stats}.items())
    status = "FAIL" if failed else "PASS"
    print(f"{status} {summary}" + (f" [{marks}]" if marks else ""))
    if failed:
        _diag("assertion", "checks failed", failed=failed)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Experiment command line: configure, seed, run, and serialize every lab,
plus the equilibrium checker and manifest replay.

Config is a flat key=value file merged with key=value overrides on the
command line; every subcommand has a fixed schema and unknown keys are
rejected before anything runs.  Replicate seeds derive from the root seed
through a splitmix step so runs are reproducible and independently
scrambled.  Each run writes CSV/JSONL outputs plus a manifest with sha256
checksums; `manifest-replay` reruns a manifest and compares checksums.

Exit codes: 0 success (and all checks passed), 1 run or check failure,
2 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .framework import TrajectoryStats, recurrence_check
from .measures import DISTRIBUTION_METRICS, FiniteMeasure
from .meanfield import OneStepGame, run_mean_field
from .rl import (BanditSpec, CartPoleConfig, bandit_action_policy,
                 bandit_state_policy, bellman_check, greedy_policy,
                 optimal_values, product_reward_model, q_table, random_mdp,
                 run_cartpole)
from .twoplayer import GameConfig, run_experiment

__all__ = ["main", "splitmix64", "parse_config_file", "ConfigError"]

MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    pass


def splitmix64(root_seed: int, index: int) -> int:
    """Replicate seed: one splitmix64 output of the root stream at index."""
    z = (root_seed + (index + 1) * 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


# -- config plumbing ---------------------------------------------------------


def parse_config_file(path: str) -> dict:
    """Flat key=value lines; blank lines and # comments ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not key=value")
        key, value = pair.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _coerce(schema: dict, raw: dict) -> dict:
    values = {key: default for key, (_, default) in schema.items()}
    for key, text in raw.items():
        if key not in schema:
            known = ", ".join(sorted(schema))
            raise ConfigError(f"unknown key {key!r} (known: {known})")
        caster = schema[key][0]
        try:
            values[key] = caster(text)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc
    return values


def _float_list(text) -> tuple:
    if isinstance(text, tuple):
        return text
    parts = [p for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ConfigError("expected a comma-separated list of numbers")
    return tuple(float(p) for p in parts)


def _choice(*options):
    def cast(text):
        if text not in options:
            raise ConfigError(f"must be one of {', '.join(options)}, got {text!r}")
        return text
    return cast


# -- output helpers -----------------------------------------------------------


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _jsonable_point(point):
    if isinstance(point, (tuple, list)):
        return [_jsonable_point(p) for p in point]
    if isinstance(point, (np.floating, float)):
        return float(point)
    if isinstance(point, (np.integer, int)):
        return int(point)
    return point


def _dist_record(site, age, measure: FiniteMeasure, regret=None, kappa=None) -> dict:
    record = {
        "site": site,
        "age": int(age),
        "atoms": [
            {"point": _jsonable_point(p), "weight": float(w)} for p, w in measure],
    }
    if regret is not None:
        record["regret"] = float(regret)
    if kappa is not None:
        record["kappa"] = float(kappa)
    return record


def _write_jsonl(path: Path, records) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def _stats_records(stats: TrajectoryStats, site_names: dict):
    for rec in stats.per_age:
        for site, measure in rec.upsilons.items():
            yield _dist_record(site_names.get(site, str(site)), rec.age,
                               measure, rec.regret, rec.kappa)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _draw_from(measure: FiniteMeasure, rng):
    points = measure.support
    weights = np.array([measure.weight(p) for p in points])
    return points[int(rng.choice(len(points), p=weights / weights.sum()))]


# -- lab runners --------------------------------------------------------------
# each runner takes (values, out_dir, tag, seed) and returns written paths


def _run_two_player(values, out_dir: Path, tag: str, seed: int) -> list:
    config = GameConfig(
        c=values["c"], b1=values["b1"], b2=values["b2"], k=values["k"],
        memory_len=values["memory-len"], recency_decay=values["recency-decay"],
        n_games=values["n-games"], action_grid=values["grid"], seed=seed)
    trace = run_experiment(config)
    csv_path = out_dir / f"twoplayer-{tag}.csv"
    _write_csv(
        csv_path,
        ["game", "a1", "a2", "x1", "x2", "cost1", "cost2",
         "kappa1", "kappa2", "explore1", "explore2"],
        [(r.game, r.a1, r.a2, r.x1, r.x2, r.cost1, r.cost2,
          r.kappa1, r.kappa2, r.explore1, r.explore2) for r in trace.rows])
    jsonl_path = out_dir / f"twoplayer-{tag}.jsonl"
    records = list(_stats_records(trace.stats[1], {"action": "p1-action"}))
    records += list(_stats_records(trace.stats[2], {"action": "p2-action"}))
    records.sort(key=lambda rec: rec["age"])
    _write_jsonl(jsonl_path, records)
    return [csv_path, jsonl_path]


def _run_mean_field(values, out_dir: Path, tag: str, seed: int) -> list:
    game = OneStepGame.example_1() if values["example"] == 1 \
        else OneStepGame.example_2()
    trace = run_mean_field(game, values["a0"], values["c"], values["iters"],
                           seed=seed)
    csv_path = out_dir / f"meanfield-{tag}.csv"
    _write_csv(
        csv_path, ["iter", "m", "best", "gamma_atoms"],
        [(n, m, b, ";".join(f"{repr(point)}:{repr(weight)}"
                            for point, weight in atoms))
         for n, m, b, atoms in trace.rows])
    jsonl_path = out_dir / f"meanfield-{tag}.jsonl"
    _write_jsonl(jsonl_path, _stats_records(trace.stats, {}))
    return [csv_path, jsonl_path]


def _run_cartpole(values, out_dir: Path, tag: str, seed: int) -> list:
    config = CartPoleConfig(
        k_phi=values["k-phi"], episodes=values["episodes"],
        t_horizon=values["t-horizon"], seed=seed)
    result = run_cartpole(config)
    csv_path = out_dir / f"cartpole-{tag}.csv"
    _write_csv(csv_path, ["episode", "score"],
               list(enumerate(result.scores)))
    jsonl_path = out_dir / f"cartpole-{tag}.jsonl"
    _write_jsonl(jsonl_path, _stats_records(result.stats, {}))
    return [csv_path, jsonl_path]


def _run_mdp(values, out_dir: Path, tag: str, seed: int) -> list:
    rng = np.random.default_rng(seed)
    rows = []
    for index in range(values["n-mdps"]):
        mdp = random_mdp(values["states"], values["actions"],
                         values["discount"], rng)
        v_star = optimal_values(mdp)
        policy = greedy_policy(mdp, v_star)
        q = q_table(mdp, policy)
        averaged = np.array([
            sum(w * q[y, a] for a, w in dist) for y, dist in enumerate(policy)])
        q_residual = float(np.max(np.abs(
            q - (mdp.rewards + mdp.discount * (mdp.kernel @ averaged)))))
        rows.append((index, q_residual, bellman_check(mdp, v_star)))
    csv_path = out_dir / f"mdp-{tag}.csv"
    _write_csv(csv_path, ["mdp", "q_residual", "bellman_residual"], rows)
    return [csv_path]


def _run_bandit(values, out_dir: Path, tag: str, seed: int) -> list:
    means = values["means"]
    if len(means) != values["arms"]:
        raise ConfigError(
            f"means lists {len(means)} arms but arms={values['arms']}")
    spec = BanditSpec.bernoulli(means, noise_width=values["delta-f"],
                                perspective=values["perspective"])
    rng = np.random.default_rng(seed)
    if spec.perspective == "state":
        policy = bandit_state_policy(spec, spec.means(), rng=rng)
    else:
        policy = bandit_action_policy(spec, product_reward_model(spec), rng=rng)

    rows, records = [], []
    for age in range(values["rounds"]):
        arm = int(_draw_from(policy, rng))
        reward = float(_draw_from(spec.rewards[arm], rng))
        rows.append((age, arm, reward))
        # constant estimation: the same induced distributions at every age
        records.append(_dist_record("agent", age, policy, regret=0.0))
        for j in range(spec.arms):
            records.append(_dist_record(f"arm{j}", age, spec.rewards[j],
                                        regret=0.0))
    csv_path = out_dir / f"bandit-{tag}.csv"
    _write_csv(csv_path, ["round", "arm", "reward"], rows)
    jsonl_path = out_dir / f"bandit-{tag}.jsonl"
    _write_jsonl(jsonl_path, records)
    return [csv_path, jsonl_path]


_COMMON = {
    "seed": (int, 0),
    "replicates": (int, 1),
}

LABS = {
    "two-player": ({
        **_COMMON,
        "c": (float, 0.3), "b1": (float, 0.1), "b2": (float, -0.2),
        "k": (int, 8), "memory-len": (int, 200),
        "recency-decay": (float, 0.98), "n-games": (int, 1000),
        "grid": (int, 101),
    }, _run_two_player),
    "mean-field": ({
        **_COMMON,
        "example": (int, 1), "c": (float, 0.3), "a0": (float, 0.9),
        "iters": (int, 500),
    }, _run_mean_field),
    "cartpole": ({
        **_COMMON,
        "k-phi": (int, 8), "episodes": (int, 1000), "t-horizon": (int, 8),
    }, _run_cartpole),
    "mdp": ({
        **_COMMON,
        "states": (int, 6), "actions": (int, 3), "discount": (float, 0.9),
        "n-mdps": (int, 50),
    }, _run_mdp),
    "bandit": ({
        **_COMMON,
        "arms": (int, 2), "means": (_float_list, (0.5, 0.6)),
        "delta-f": (float, 0.2),
        "perspective": (_choice("state", "action"), "state"),
        "rounds": (int, 300),
    }, _run_bandit),
}


def run_lab(command: str, values: dict, out_dir: Path) -> dict:
    """Execute one lab for every replicate; return the manifest dict."""
    if values["replicates"] < 1:
        raise ConfigError("replicates must be positive")
    if command == "mean-field" and values["example"] not in (1, 2):
        raise ConfigError("example must be 1 or 2")
    out_dir.mkdir(parents=True, exist_ok=True)
    schema, runner = LABS[command]
    root = values["seed"]
    seeds = [splitmix64(root, i) for i in range(values["replicates"])]
    written = []
    for i, seed in enumerate(seeds):
        written.extend(runner(values, out_dir, f"r{i}", seed))
    manifest = {
        "command": command,
        "version": __version__,
        "config": {k: list(v) if isinstance(v, tuple) else v
                   for k, v in sorted(values.items())},
        "root_seed": root,
        "replicate_seeds": seeds,
        "outputs": {p.name: _sha256(p) for p in written},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return manifest


# -- equilibrium checking ------------------------------------------------------


def _load_trace_file(path: str) -> dict:
    """One JSONL trace -> {site: TrajectoryStats}."""
    per_site: dict[str, TrajectoryStats] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                site = record["site"]
                age = record["age"]
                atoms = [
                    (tuple(a["point"]) if isinstance(a["point"], list)
                     else a["point"], a["weight"])
                    for a in record["atoms"]]
            except (KeyError, TypeError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed record: {exc}")
            stats = per_site.setdefault(site, TrajectoryStats())
            stats.record(age, {site: FiniteMeasure(atoms)},
                         regret=record.get("regret"),
                         kappa=record.get("kappa"))
    if not per_site:
        raise ValueError(f"{path}: no distribution records")
    return per_site


def _resolve_prior(spec: str, stats: TrajectoryStats, site: str) -> FiniteMeasure:
    if spec == "first":
        return stats.per_age[0].upsilons[site]
    if spec.startswith("point:"):
        return FiniteMeasure.dirac(float(spec[len("point:"):]))
    raise ConfigError(f"prior must be 'first' or 'point:VALUE', got {spec!r}")


def check_equilibrium(trace_paths, epsilon: float, r: float, delta: float,
                      kappa_threshold: float | None = None,
                      metric: str = "total-variation",
                      window: int | None = None,
                      prior: str = "first") -> dict:
    """Evaluate the three observable conditions per site across replicates.

    Optimality: the largest recorded regret must be at most epsilon.
    Recurrence: the fraction of replicates whose trailing-window distance
    to the prior never comes within r must be at most delta.  Confidence:
    the smallest recorded kappa must exceed kappa_threshold (checked only
    when a threshold is given and kappas were recorded).
    """
    replicates = [_load_trace_file(p) for p in trace_paths]
    sites = list(replicates[0])
    for i, rep in enumerate(replicates[1:], start=1):
        if set(rep) != set(sites):
            raise ValueError(
                f"{trace_paths[i]}: sites {sorted(rep)} do not match "
                f"{sorted(sites)}")
    report = {"epsilon": epsilon, "r": r, "delta": delta,
              "kappa_threshold": kappa_threshold, "metric": metric,
              "prior": prior, "replicates": len(replicates), "sites": {}}
    all_pass = True
    for site in sites:
        regrets, kappas, tail_mins = [], [], []
        for rep in replicates:
            stats = rep[site]
            n_ages = len(stats)
            w = window if window is not None else min(
                n_ages, max(50, n_ages // 4))
            w = min(w, n_ages)
            prior_dist = _resolve_prior(prior, stats, site)
            rec = recurrence_check(stats, prior_dist, metric, w, r=r, site=site)
            tail_mins.append(rec.min_distance_tail)
            regrets.extend(rec_.regret for rec_ in stats.per_age
                           if rec_.regret is not None)
            kappas.extend(rec_.kappa for rec_ in stats.per_age
                          if rec_.kappa is not None)
        measured_eps = max(regrets) if regrets else None
        kappa_min = min(kappas) if kappas else None
        delta_hat = sum(1 for m in tail_mins if m > r) / len(tail_mins)
        ok = delta_hat <= delta
        if measured_eps is not None:
            ok = ok and measured_eps <= epsilon
        if kappa_threshold is not None and kappa_min is not None:
            ok = ok and kappa_min > kappa_threshold
        report["sites"][site] = {
            "measured_epsilon": measured_eps,
            "tail_min_worst": max(tail_mins),
            "delta_hat": delta_hat,
            "kappa_min": kappa_min,
            "window": w,
            "pass": ok,
        }
        all_pass = all_pass and ok
    report["pass"] = all_pass
    return report


def _print_check_report(report: dict) -> None:
    for site, row in report["sites"].items():
        eps = ("skipped" if row["measured_epsilon"] is None
               else f"{row['measured_epsilon']:.6g}<={report['epsilon']:g}")
        kap = "skipped"
        if report["kappa_threshold"] is not None and row["kappa_min"] is not None:
            kap = f"{row['kappa_min']:.6g}>{report['kappa_threshold']:g}"
        verdict = "PASS" if row["pass"] else "FAIL"
        print(f"site {site}: regret {eps} | tail-min {row['tail_min_worst']:.6g} "
              f"delta-hat {row['delta_hat']:.4g}<={report['delta']:g} "
              f"| kappa {kap} -> {verdict}")
    print(f"overall: {'PASS' if report['pass'] else 'FAIL'}")


# -- manifest replay -----------------------------------------------------------


def replay_manifest(manifest_path: str, out_dir: Path | None = None) -> dict:
    """Rerun a manifest's command and compare output checksums."""
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    command = manifest["command"]
    if command not in LABS:
        raise ConfigError(f"manifest names unknown command {command!r}")
    values = {
        k: tuple(v) if isinstance(v, list) else v
        for k, v in manifest["config"].items()}
    if out_dir is None:
        out_dir = Path(tempfile.mkdtemp(prefix="gamelearn-replay-"))
    fresh = run_lab(command, values, out_dir)
    mismatches = sorted(
        name for name, digest in manifest["outputs"].items()
        if fresh["outputs"].get(name) != digest)
    missing = sorted(set(manifest["outputs"]) - set(fresh["outputs"]))
    return {"out_dir": str(out_dir), "mismatches": mismatches,
            "missing": missing,
            "ok": not mismatches and not missing}


# -- entry point ---------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gamelearn",
        description="seeded game-learning experiments and equilibrium checks")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in LABS:
        p = sub.add_parser(name, help=f"run the {name} lab")
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--out", default=f"runs/{name}",
                       help="output directory (default runs/<lab>)")
        p.add_argument("overrides", nargs="*", metavar="key=value",
                       help="config overrides")

    p = sub.add_parser("check-equilibrium",
                       help="test traces for the observable equilibrium conditions")
    p.add_argument("--traces", nargs="+", required=True,
                   help="JSONL trace files, one per replicate")
    p.add_argument("--epsilon", type=float, default=1e-9)
    p.add_argument("--r", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--kappa-threshold", type=float, default=None)
    p.add_argument("--metric", choices=sorted(DISTRIBUTION_METRICS),
                   default="total-variation")
    p.add_argument("--window", type=int, default=None,
                   help="trailing window (default: 25%% of ages, min 50)")
    p.add_argument("--prior", default="first",
                   help="'first' or 'point:VALUE' reference distribution")
    p.add_argument("--report", help="also write the JSON report here")

    p = sub.add_parser("manifest-replay",
                       help="rerun a manifest and compare checksums")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None,
                   help="rerun directory (default: fresh temp dir)")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in LABS:
            schema = LABS[args.command][0]
            raw = parse_config_file(args.config) if args.config else {}
            raw.update(_parse_overrides(args.overrides))
            values = _coerce(schema, raw)
            manifest = run_lab(args.command, values, Path(args.out))
            print(f"wrote {len(manifest['outputs'])} files to {args.out} "
                  f"(seeds {manifest['replicate_seeds']})")
            return 0
        if args.command == "check-equilibrium":
            report = check_equilibrium(
                args.traces, epsilon=args.epsilon, r=args.r, delta=args.delta,
                kappa_threshold=args.kappa_threshold, metric=args.metric,
                window=args.window, prior=args.prior)
            _print_check_report(report)
            if args.report:
                Path(args.report).write_text(
                    json.dumps(report, indent=2) + "\n", encoding="utf-8")
            return 0 if report["pass"] else 1
        if args.command == "manifest-replay":
            result = replay_manifest(
                args.manifest, Path(args.out) if args.out else None)
            if result["ok"]:
                print(f"replay matches ({result['out_dir']})")
                return 0
            print("replay MISMATCH: "
                  f"changed {result['mismatches']} missing {result['missing']}")
            return 1
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

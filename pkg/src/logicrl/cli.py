"""Command-line interface: train, eval, export-rules, verify, bench.

Each training seed writes its own subdirectory (checkpoint, metrics as
line-delimited JSON, decoded rules); a final aggregation step merges the
per-seed scores into one report.  Identical configurations and seeds
reproduce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import envs
from .constraints import load_preset
from .logic import Domain, load_alphabet
from .oracle import boolean_eval, CrispRule
from .rules import RuleModel
from .training import (
    TRAINING_DEFAULTS,
    TrainerConfig,
    default_config,
    evaluate,
    evaluate_traffic,
    random_policy_score,
    random_traffic_score,
    train,
    train_traffic,
    transfer_traffic_models,
)

BENCH_SWEEPS = {
    "countdown": ("stack", (2, 3, 4, 5)),
    "countdown-range": ("range", (6, 11, 16, 21)),
    "blocksworld": ("blocks", (3, 4, 5)),
    "gridworld": ("grid", (3, 5, 7)),
    "doorkey": ("keys", (2, 3, 4)),
    "traffic": ("agents", (5, 8)),
}


class CliError(Exception):
    pass


def _parse_kv_ints(text: str) -> dict[str, int]:
    out = {}
    for part in text.split(","):
        if not part:
            continue
        key, _, value = part.partition("=")
        if not value:
            raise CliError(f"expected name=count, got {part!r}")
        out[key.strip()] = int(value)
    return out


def _read_config_file(path: str) -> dict:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    return values


def _env_kwargs(args, file_config: dict) -> dict:
    """Environment overrides from the config file (training flags win)."""
    kwargs = {}
    casts = {
        "lo": int, "hi": int, "stack_len": int, "null_prob": float,
        "size": int, "n_obstacles": int, "horizon": int, "n_keys": int,
        "n_doors": int, "n_agents": int, "arrival_rate": float, "drain": int,
        "normalizer": float, "stochastic": lambda s: s.lower() in ("1", "true", "yes"),
        "dense_penalty": lambda s: s.lower() in ("1", "true", "yes"),
    }
    for key, value in file_config.items():
        if key in casts:
            kwargs[key] = casts[key](value)
    return kwargs


def _trainer_overrides(args, file_config: dict) -> dict:
    overrides = {}
    for key, cast in (("episodes", int), ("gamma", float), ("lr", float),
                      ("lambda_sem", float), ("eval_episodes", int)):
        if key in file_config:
            overrides[key] = cast(file_config[key])
    if args.episodes is not None:
        overrides["episodes"] = args.episodes
    if args.gamma is not None:
        overrides["gamma"] = args.gamma
    if args.lr is not None:
        overrides["lr"] = args.lr
    if args.lambda_sem is not None:
        overrides["lambda_sem"] = args.lambda_sem
    if args.rules_per_action:
        overrides["rules_per_schema"] = _parse_kv_ints(args.rules_per_action)
    return overrides


def _constraints_arg(args) -> str | None:
    if getattr(args, "no_constraints", False):
        return None
    if getattr(args, "constraints", None):
        return Path(args.constraints).read_text()
    return "preset"


def _make_env(name: str, seed: int, variant: str | None, env_kwargs: dict):
    if variant:
        return envs.make_variant(name, variant, seed=seed, **env_kwargs)
    return envs.make(name, seed=seed, **env_kwargs)


def _check_alphabet_override(args, env) -> None:
    if getattr(args, "alphabet", None):
        declared = load_alphabet(args.alphabet)
        ours = env.alphabet
        if [str(a) for a in Domain(declared).variable_atoms] != \
                [str(a) for a in Domain(ours).variable_atoms]:
            raise CliError(
                "alphabet file does not induce the environment's atom space")


def cmd_train(args) -> int:
    file_config = _read_config_file(args.config) if args.config else {}
    env_kwargs = _env_kwargs(args, file_config)
    overrides = _trainer_overrides(args, file_config)
    constraints = _constraints_arg(args)
    seeds = [int(s) for s in args.seeds.split(",") if s]
    if not seeds:
        raise CliError("need at least one seed")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {"env": args.env, "seeds": {}, "failures": {}}
    for seed in seeds:
        seed_dir = out / f"seed-{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        try:
            env = _make_env(args.env, seed, None, env_kwargs)
            _check_alphabet_override(args, env)
            config = default_config(args.env, seed=seed, **overrides)
            with open(seed_dir / "metrics.jsonl", "w", encoding="utf-8") as metrics:
                writer = lambda rec: metrics.write(json.dumps(rec, sort_keys=True) + "\n")
                if args.env == "traffic":
                    result = train_traffic(env, config, constraints, on_record=writer)
                    for agent, model in result.models.items():
                        model.save(seed_dir / f"checkpoint-{agent}.json",
                                   metadata=_metadata(args.env, seed, config))
                    fresh = _make_env(args.env, seed, None, env_kwargs)
                    score = evaluate_traffic(result.models, fresh,
                                             episodes=max(10, config.eval_episodes // 5))
                    rules_text = "".join(
                        f"# agent {agent}\n" + result.models[agent].export_rules()
                        for agent in sorted(result.models))
                else:
                    result = train(env, config, constraints, on_record=writer)
                    result.model.save(seed_dir / "checkpoint.json",
                                      metadata=_metadata(args.env, seed, config))
                    fresh = _make_env(args.env, seed, None, env_kwargs)
                    score = evaluate(result.model, fresh, episodes=config.eval_episodes,
                                     seed=seed)
                    rules_text = result.model.export_rules()
            (seed_dir / "rules.dl").write_text(rules_text, encoding="utf-8")
            report["seeds"][str(seed)] = round(score, 6)
            print(f"seed {seed}: eval {score:.4f}")
        except (RuntimeError, ValueError) as err:
            report["failures"][str(seed)] = str(err)
            print(f"seed {seed}: failed ({err})", file=sys.stderr)
    (out / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n",
                                     encoding="utf-8")
    return 0 if report["seeds"] else 1


def _metadata(env_name: str, seed: int, config: TrainerConfig) -> dict:
    return {
        "env": env_name,
        "seed": seed,
        "episodes": config.episodes,
        "gamma": config.gamma,
        "lr": config.lr,
        "lambda_sem": config.lambda_sem,
    }


def _load_checkpoint(path: str, env) -> RuleModel:
    model, _ = RuleModel.load(path, Domain(env.alphabet))
    return model


def cmd_eval(args) -> int:
    file_config = _read_config_file(args.config) if args.config else {}
    env_kwargs = _env_kwargs(args, file_config)
    env_name = args.env
    if env_name is None and args.checkpoint:
        with open(args.checkpoint, "r", encoding="utf-8") as fh:
            env_name = json.load(fh).get("metadata", {}).get("env")
    if env_name is None:
        raise CliError("--env is required (checkpoint carries no environment name)")
    env = _make_env(env_name, args.seed, args.variant, env_kwargs)
    if args.policy == "random":
        if env_name == "traffic":
            score = random_traffic_score(env, episodes=args.episodes, seed=args.seed)
        else:
            score = random_policy_score(env, episodes=args.episodes, seed=args.seed)
        print(f"random policy mean return: {score:.4f}")
        return 0
    if not args.checkpoint:
        raise CliError("--checkpoint is required unless --policy random")
    if env_name == "traffic":
        models = {}
        for agent in env.intersections:
            path = Path(args.checkpoint)
            candidate = path if path.is_file() else path / f"checkpoint-{agent}.json"
            models[agent] = _load_checkpoint(str(candidate), env)
        score = evaluate_traffic(models, env, episodes=args.episodes, seed=args.seed)
    else:
        model = _load_checkpoint(args.checkpoint, env)
        score = evaluate(model, env, episodes=args.episodes, seed=args.seed)
    label = f" [{args.variant}]" if args.variant else ""
    print(f"mean return over {args.episodes} episodes{label}: {score:.4f}")
    return 0


def cmd_export_rules(args) -> int:
    env_name = args.env
    if env_name is None:
        with open(args.checkpoint, "r", encoding="utf-8") as fh:
            env_name = json.load(fh).get("metadata", {}).get("env")
    if env_name is None:
        raise CliError("--env is required (checkpoint carries no environment name)")
    env = envs.make(env_name)
    model = _load_checkpoint(args.checkpoint, env)
    text = model.export_rules()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return 0


def cmd_verify(args) -> int:
    """Cross-check the fuzzy path against crisp boolean chaining."""
    from .inference import PolicyEvaluator, evaluate_rule
    from .logic import Alphabet

    rng = np.random.default_rng(args.seed)
    ab = Alphabet([("r", 0), ("mv", 1)], [("p", 1), ("q", 2), ("flag", 0)],
                  ["a", "b"], ["X", "Y"])
    dom = Domain(ab)
    checks = 0
    for _ in range(args.trials):
        v = (rng.random(len(dom.ground_atoms)) < 0.5).astype(float)
        state = frozenset(dom.ground_atoms.atom(i) for i in np.flatnonzero(v))
        size = int(rng.integers(1, 4))
        body_idx = np.sort(rng.choice(len(dom.variable_atoms), size=size, replace=False))
        body = frozenset(dom.variable_atoms.atom(int(j)) for j in body_idx)
        b = np.zeros(len(dom.variable_atoms), dtype=int)
        b[body_idx] = 1
        for action in (ab.atom("r"), ab.atom("mv", "a")):
            fuzzy = evaluate_rule(b, np.ones(size), action, v, dom)
            crisp = boolean_eval(CrispRule(action.predicate, body), action, state,
                                 frozenset(), ab)
            if (fuzzy == 1.0) != crisp:
                print(f"MISMATCH: body={sorted(map(str, body))} action={action}")
                return 1
            checks += 1
    print(f"crisp/fuzzy agreement verified on {checks} rule evaluations")
    return 0


def _bench_env(name: str, size: int):
    if name == "countdown":
        return envs.make("countdown", stack_len=size)
    if name == "countdown-range":
        return envs.make("countdown", lo=0, hi=size - 1)
    if name == "blocksworld":
        blocks = tuple("abcdefgh"[:size])
        return envs.make("blocksworld", blocks=blocks, configs=None)
    if name == "gridworld":
        return envs.make("gridworld", size=size)
    if name == "doorkey":
        return envs.make("doorkey", n_keys=size, n_doors=1)
    if name == "traffic":
        return envs.make("traffic", n_agents=size)
    raise CliError(f"no benchmark sweep named {name!r}")


def cmd_bench(args) -> int:
    name = args.env
    axis, sizes = BENCH_SWEEPS[name]
    if args.sweep:
        sizes = tuple(int(s) for s in args.sweep.split(","))
    rows = []
    for size in sizes:
        env = _bench_env(name, size)
        config = default_config(name.split("-")[0], seed=args.seed, episodes=0)
        start = time.perf_counter()
        if name == "traffic":
            from .training import TrafficResult

            domain = Domain(env.alphabet)
            models = {agent: RuleModel(domain, env.default_rules_per_schema)
                      for agent in env.intersections}
            evaluate_traffic(models, env, episodes=args.episodes, seed=args.seed)
        else:
            domain = Domain(env.alphabet)
            model = RuleModel(domain, env.default_rules_per_schema,
                              init_logit=config.init_logit)
            evaluate(model, env, episodes=args.episodes, seed=args.seed)
        elapsed = (time.perf_counter() - start) / args.episodes
        rows.append((size, elapsed))
    print(f"{axis:>10}  s/episode")
    for size, elapsed in rows:
        print(f"{size:>10}  {elapsed:.6f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(f"{axis}\ts_per_episode\n")
            for size, elapsed in rows:
                fh.write(f"{size}\t{elapsed:.6f}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logicrl",
        description="Train and evaluate interpretable first-order rule policies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common_env = argparse.ArgumentParser(add_help=False)
    common_env.add_argument("--env", choices=envs.ENV_NAMES, default=None)
    common_env.add_argument("--config", help="key = value environment/config file")
    common_env.add_argument("--seed", type=int, default=0)

    p_train = sub.add_parser("train", parents=[common_env], help="train one or more seeds")
    p_train.add_argument("--seeds", default="0", help="comma-separated seed list")
    p_train.add_argument("--episodes", type=int, default=None)
    p_train.add_argument("--gamma", type=float, default=None)
    p_train.add_argument("--lr", type=float, default=None)
    p_train.add_argument("--lambda-sem", dest="lambda_sem", type=float, default=None)
    p_train.add_argument("--rules-per-action", default=None,
                         help="for example move=2,pick=1")
    p_train.add_argument("--alphabet", help="alphabet file cross-checked against the env")
    p_train.add_argument("--constraints", help="constraint file replacing the preset")
    p_train.add_argument("--no-constraints", action="store_true")
    p_train.add_argument("--out", required=True)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", parents=[common_env],
                            help="score a checkpoint, optionally on a variant")
    p_eval.add_argument("--checkpoint")
    p_eval.add_argument("--variant", help="for example dynamic-stack=4")
    p_eval.add_argument("--episodes", type=int, default=50)
    p_eval.add_argument("--policy", choices=["rules", "random"], default="rules")
    p_eval.set_defaults(func=cmd_eval)

    p_export = sub.add_parser("export-rules", help="decode a checkpoint to Datalog text")
    p_export.add_argument("--checkpoint", required=True)
    p_export.add_argument("--env", choices=envs.ENV_NAMES, default=None)
    p_export.add_argument("--out")
    p_export.set_defaults(func=cmd_export_rules)

    p_verify = sub.add_parser("verify", help="cross-check fuzzy inference against "
                                             "boolean forward chaining")
    p_verify.add_argument("--trials", type=int, default=500)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.set_defaults(func=cmd_verify)

    p_bench = sub.add_parser("bench", help="per-episode timing over a size sweep")
    p_bench.add_argument("--env", choices=sorted(BENCH_SWEEPS), required=True)
    p_bench.add_argument("--sweep", help="comma-separated sizes")
    p_bench.add_argument("--episodes", type=int, default=20)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

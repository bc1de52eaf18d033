"""Policy-gradient training of rule models.

One update per episode: encode the state, sample a rule per slot, run fuzzy
inference over the current ground actions, sample an action, and repeat to
the horizon.  The update ascends the score-function estimate of expected
discounted return (reward-to-go, optionally centered by a running-mean
baseline) and descends the semantic loss summed over the episode's steps.

Evaluation freezes the rules (threshold extraction, greedy action choice),
so scores on generalization variants measure the learned rules as written.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .constraints import compile_constraints, load_preset, parse_constraints, semantic_loss
from .gradients import (
    GradientTape,
    SlotSample,
    StepRecord,
    accumulate_log_policy_gradient,
    grad_semantic_loss,
    zero_gradients,
)
from .inference import PolicyEvaluator
from .logic import Domain
from .rules import EVAL, TRAIN, RuleModel

TRAINING_DEFAULTS: dict[str, dict] = {
    "countdown": dict(episodes=9000, lr=0.08, gamma=1.0, lambda_sem=0.1),
    "blocksworld": dict(episodes=5000, lr=0.08, gamma=0.99, lambda_sem=0.1),
    "gridworld": dict(episodes=6000, lr=0.08, gamma=0.97, lambda_sem=0.1),
    "doorkey": dict(episodes=3000, lr=0.08, gamma=0.97, lambda_sem=0.1),
    "traffic": dict(episodes=600, lr=0.08, gamma=0.9, lambda_sem=0.1),
}


@dataclass
class TrainerConfig:
    episodes: int = 2000
    gamma: float = 0.99
    lr: float = 0.05
    lambda_sem: float = 0.1
    rules_per_schema: Union[int, Mapping[str, int], None] = None  # None: env default
    seed: int = 0
    baseline: str = "running-mean"  # or "none"
    eval_episodes: int = 50
    init_logit: float | None = None  # None: scaled so a sampled body has ~1 atom
    init_noise: float = 0.3
    resample: str = "episode"  # redraw rules per episode or per step
    batch_episodes: int = 1  # episodes per parameter update
    eval_every: int = 500  # greedy-eval cadence for checkpoint selection; 0 disables
    eval_probe_episodes: int = 30

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.lr < 0 or self.lambda_sem < 0 or self.episodes < 0:
            raise ValueError("negative hyperparameter")
        if self.baseline not in ("none", "running-mean"):
            raise ValueError(f"unknown baseline {self.baseline!r}")
        if self.resample not in ("episode", "step"):
            raise ValueError(f"unknown resampling mode {self.resample!r}")

    def resolved_init_logit(self, m: int) -> float:
        if self.init_logit is not None:
            return self.init_logit
        return float(-np.log(max(m - 1, 2)))


def default_config(env_name: str, **overrides) -> TrainerConfig:
    params = dict(TRAINING_DEFAULTS.get(env_name, {}))
    params.update(overrides)
    return TrainerConfig(**params)


@dataclass
class EpisodeLog:
    rewards: list[float] = field(default_factory=list)
    tape: GradientTape = field(default_factory=GradientTape)
    sem_loss_per_step: float = 0.0

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))

    @property
    def steps(self) -> int:
        return len(self.rewards)


def compute_returns(rewards: Sequence[float], gamma: float) -> list[float]:
    """Discounted reward-to-go for every step."""
    returns: list[float] = []
    acc = 0.0
    for r in reversed(rewards):
        acc = r + gamma * acc
        returns.append(acc)
    returns.reverse()
    return returns


class RunningBaseline:
    """Per-timestep exponential moving average of observed returns.

    Returns at different depths of an episode have very different scales
    (early steps still carry the whole future), so the mean is tracked per
    step index; unseen depths fall back to the deepest tracked value.
    """

    def __init__(self, enabled: bool = True, momentum: float = 0.9):
        self.enabled = enabled
        self.momentum = momentum
        self.values: list[float] = []

    def value_at(self, t: int) -> float:
        if not self.enabled or not self.values:
            return 0.0
        return self.values[min(t, len(self.values) - 1)]

    @property
    def value(self) -> float:
        return self.value_at(0)

    def update(self, returns: Sequence[float]) -> None:
        if not self.enabled:
            return
        for t, ret in enumerate(returns):
            if t >= len(self.values):
                self.values.append(float(ret))
            else:
                self.values[t] = self.momentum * self.values[t] + \
                    (1.0 - self.momentum) * float(ret)


def sample_step_rules(model: RuleModel, mode: str, rng=None):
    """One (body, weights) pair per rule slot, plus tape samples."""
    rules: dict[str, list[tuple[np.ndarray, np.ndarray]]] = {}
    samples: dict[str, list[SlotSample]] = {}
    for schema in model.schemas:
        name = schema.name
        per_slot = []
        per_sample = []
        for slot in range(model.slots[name]):
            b, w = model.sample(name, slot, mode, rng)
            body = np.flatnonzero(b)
            per_slot.append((body, w))
            per_sample.append(SlotSample(body, w))
        rules[name] = per_slot
        samples[name] = per_sample
    return rules, samples


def run_episode(
    env,
    model: RuleModel,
    evaluator: PolicyEvaluator,
    domain: Domain,
    mode: str = TRAIN,
    rng: np.random.Generator | None = None,
    constraint_tuples: Sequence[tuple[int, ...]] = (),
    fixed_rules=None,
    resample: str = "episode",
    explain: Callable[[str], None] | None = None,
) -> EpisodeLog:
    """Roll out one episode.

    In train mode rules are redrawn once per episode by default, keeping the
    sampled policy consistent along the trajectory; per-step redrawing is
    available for comparison.
    """
    from .inference import explain_action  # local import to keep module load light

    log = EpisodeLog()
    state = env.reset()
    bg = domain.encode((), env.background)
    if constraint_tuples:
        probs = [model.atom_probabilities(s.name, r)
                 for s in model.schemas for r in range(model.slots[s.name])]
        log.sem_loss_per_step = semantic_loss(probs, constraint_tuples)
    if mode == EVAL and fixed_rules is None:
        fixed_rules, _ = sample_step_rules(model, EVAL)
    episode_rules = episode_samples = None
    if mode == TRAIN and resample == "episode":
        episode_rules, episode_samples = sample_step_rules(model, TRAIN, rng)
    done = False
    while not done:
        v = bg.copy()
        for atom in state:
            v[domain.ground_atoms.index(atom)] = 1.0
        if mode == TRAIN:
            if resample == "episode":
                rules, samples = episode_rules, episode_samples
            else:
                rules, samples = sample_step_rules(model, TRAIN, rng)
        else:
            rules, samples = fixed_rules, None
        actions = env.ground_actions()
        step_eval = evaluator.evaluate(v, actions, rules)
        if mode == TRAIN:
            chosen = int(rng.choice(len(actions), p=step_eval.probs))
        else:
            chosen = int(np.argmax(step_eval.probs))
        action = actions[chosen]
        if samples is not None:
            log.tape.record(StepRecord(
                probs=step_eval.probs,
                chosen=chosen,
                action_schemas=tuple(a.predicate.name for a in actions),
                action_slots=tuple(e.slot for e in step_eval.per_action),
                action_truth_rows=tuple(e.y_star for e in step_eval.per_action),
                slot_samples=samples,
            ))
        if explain is not None:
            ev = step_eval.per_action[chosen]
            body, w = rules[action.predicate.name][ev.slot]
            b = np.zeros(len(domain.variable_atoms), dtype=np.int8)
            b[body] = 1
            explain(explain_action(b, w, action, v, domain, ev.slot))
        outcome = env.step(action)
        log.rewards.append(outcome.reward)
        state = outcome.next_state
        done = outcome.done
    return log


def apply_update(
    model: RuleModel,
    logs: Sequence[EpisodeLog],
    config: TrainerConfig,
    constraint_tuples: Sequence[tuple[int, ...]],
    baseline: RunningBaseline,
) -> dict:
    """REINFORCE ascent step with the semantic-loss penalty."""
    shapes = {name: arr.shape for name, arr in model.logits.items()}
    grads = zero_gradients(shapes)
    per_episode_returns: list[list[float]] = []
    total_steps = 0
    for log in logs:
        returns = compute_returns(log.rewards, config.gamma)
        per_episode_returns.append(returns)
        total_steps += len(log.tape)
        for t, (record, ret) in enumerate(zip(log.tape.steps, returns)):
            accumulate_log_policy_gradient(record, ret - baseline.value_at(t), grads)
    if config.lambda_sem > 0 and constraint_tuples and total_steps:
        probs = {name: np.vstack([model.atom_probabilities(name, r)
                                  for r in range(model.slots[name])])
                 for name in model.logits}
        sem = grad_semantic_loss(probs, constraint_tuples)
        for name in grads:
            grads[name] -= config.lambda_sem * total_steps * sem[name]
    scale = config.lr / max(len(logs), 1)  # keep step size per-episode comparable
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise RuntimeError(f"non-finite gradient for schema {name}")
        model.logits[name] += scale * g
    for returns in per_episode_returns:
        baseline.update(returns)
    return {"grad_norm": float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))}


def resolve_constraints(env, domain: Domain, constraints: Union[str, None]) -> tuple:
    """Constraint tuples from a preset name ("preset"), file text, or None."""
    if constraints is None:
        return ()
    text = load_preset(env.constraints_preset) if constraints == "preset" else constraints
    axioms = parse_constraints(text, domain.alphabet)
    return compile_constraints(axioms, domain.variable_atoms, domain.alphabet.variables)


@dataclass
class TrainResult:
    model: RuleModel
    history: list[dict]
    constraint_tuples: tuple
    config: TrainerConfig
    best_eval: float | None = None
    best_episode: int | None = None


def train(
    env,
    config: TrainerConfig,
    constraints: Union[str, None] = "preset",
    on_record: Callable[[dict], None] | None = None,
) -> TrainResult:
    domain = Domain(env.alphabet)
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    env.rng = np.random.default_rng(seeds[0])
    rng = np.random.default_rng(seeds[1])
    rules_per_schema = config.rules_per_schema
    if rules_per_schema is None:
        rules_per_schema = dict(env.default_rules_per_schema) or 1
    model = RuleModel(
        domain,
        rules_per_schema=rules_per_schema,
        init_logit=config.resolved_init_logit(len(domain.variable_atoms)),
        init_noise=config.init_noise,
        rng=np.random.default_rng(seeds[2]),
    )
    tuples = resolve_constraints(env, domain, constraints)
    evaluator = PolicyEvaluator(domain)
    baseline = RunningBaseline(enabled=config.baseline == "running-mean")
    history = []
    best_eval = None
    best_episode = None
    best_logits = None
    probe_env = None
    if config.eval_every:
        probe_env = copy.deepcopy(env)

    def probe(episode: int) -> float:
        probe_env.rng = np.random.default_rng(np.random.SeedSequence((config.seed, 7001)))
        fixed, _ = sample_step_rules(model, EVAL)
        totals = [
            run_episode(probe_env, model, evaluator, domain, EVAL, fixed_rules=fixed).total_reward
            for _ in range(config.eval_probe_episodes)
        ]
        return float(np.mean(totals))

    pending: list[EpisodeLog] = []
    for episode in range(config.episodes):
        log = run_episode(env, model, evaluator, domain, TRAIN, rng, tuples,
                          resample=config.resample)
        pending.append(log)
        if len(pending) >= config.batch_episodes or episode == config.episodes - 1:
            apply_update(model, pending, config, tuples, baseline)
            pending = []
        record = {
            "episode": episode,
            "return": round(log.total_reward, 6),
            "l_sem": round(log.sem_loss_per_step * log.steps, 6),
        }
        if config.eval_every and (episode + 1) % config.eval_every == 0:
            score = probe(episode)
            record["eval"] = round(score, 6)
            if best_eval is None or score > best_eval:
                best_eval = score
                best_episode = episode
                best_logits = {n: arr.copy() for n, arr in model.logits.items()}
        history.append(record)
        if on_record is not None:
            on_record(record)
    if best_logits is not None:
        model.logits = best_logits
    return TrainResult(model, history, tuples, config, best_eval, best_episode)


def evaluate(model: RuleModel, env, episodes: int = 50, seed: int | None = 0) -> float:
    """Mean undiscounted return of greedy episodes under frozen rules."""
    domain = Domain(env.alphabet)
    evaluator = PolicyEvaluator(domain)
    if seed is not None:
        env.rng = np.random.default_rng(np.random.SeedSequence((seed, 60870)))
    fixed_rules, _ = sample_step_rules(model, EVAL)
    totals = []
    for _ in range(episodes):
        log = run_episode(env, model, evaluator, domain, EVAL, fixed_rules=fixed_rules)
        totals.append(log.total_reward)
    return float(np.mean(totals))


def random_policy_score(env, episodes: int = 50, seed: int | None = 0) -> float:
    """Uniform-action floor for comparison."""
    rng = np.random.default_rng(seed)
    if seed is not None:
        env.rng = np.random.default_rng(np.random.SeedSequence((seed, 60871)))
    totals = []
    for _ in range(episodes):
        env.reset()
        total, done = 0.0, False
        while not done:
            actions = env.ground_actions()
            outcome = env.step(actions[int(rng.integers(len(actions)))])
            total += outcome.reward
            done = outcome.done
        totals.append(total)
    return float(np.mean(totals))


# -- traffic: synchronized multi-agent training ------------------------------


@dataclass
class TrafficResult:
    models: dict[str, RuleModel]
    history: list[dict]


def _traffic_setup(network, config: TrainerConfig, constraints):
    domain = Domain(network.alphabet)
    evaluator = PolicyEvaluator(domain)
    tuples = resolve_constraints(network, domain, constraints)
    return domain, evaluator, tuples


def train_traffic(
    network,
    config: TrainerConfig,
    constraints: Union[str, None] = "preset",
    on_record: Callable[[dict], None] | None = None,
) -> TrafficResult:
    """One independent learner per intersection over a shared queue network."""
    domain, evaluator, tuples = _traffic_setup(network, config, constraints)
    seeds = np.random.SeedSequence(config.seed).spawn(2 + network.n_agents)
    network.rng = np.random.default_rng(seeds[0])
    rng = np.random.default_rng(seeds[1])
    agents = network.intersections
    init_logit = config.resolved_init_logit(len(domain.variable_atoms))
    models = {
        agent: RuleModel(domain, network.default_rules_per_schema,
                         init_logit, config.init_noise,
                         np.random.default_rng(seeds[2 + k]))
        for k, agent in enumerate(agents)
    }
    baselines = {agent: RunningBaseline(config.baseline == "running-mean") for agent in agents}
    bg = domain.encode((), network.background)
    sem_probs = None
    history = []
    for episode in range(config.episodes):
        network.reset()
        logs = {agent: EpisodeLog() for agent in agents}
        if tuples:
            for agent in agents:
                probs = [models[agent].atom_probabilities("green", r)
                         for r in range(models[agent].slots["green"])]
                logs[agent].sem_loss_per_step = semantic_loss(probs, tuples)
        episode_draws = None
        if config.resample == "episode":
            episode_draws = {agent: sample_step_rules(models[agent], TRAIN, rng)
                             for agent in agents}
        done = False
        while not done:
            choices = {}
            for agent in agents:
                v = bg.copy()
                for atom in network.agent_state(agent):
                    v[domain.ground_atoms.index(atom)] = 1.0
                if episode_draws is not None:
                    rules, samples = episode_draws[agent]
                else:
                    rules, samples = sample_step_rules(models[agent], TRAIN, rng)
                actions = network.agent_actions(agent)
                step_eval = evaluator.evaluate(v, actions, rules)
                chosen = int(rng.choice(len(actions), p=step_eval.probs))
                choices[agent] = actions[chosen]
                logs[agent].tape.record(StepRecord(
                    probs=step_eval.probs,
                    chosen=chosen,
                    action_schemas=tuple(a.predicate.name for a in actions),
                    action_slots=tuple(e.slot for e in step_eval.per_action),
                    action_truth_rows=tuple(e.y_star for e in step_eval.per_action),
                    slot_samples=samples,
                ))
            rewards, done = network.advance(choices)
            for agent in agents:
                logs[agent].rewards.append(rewards[agent])
        for agent in agents:
            apply_update(models[agent], [logs[agent]], config, tuples, baselines[agent])
        record = {
            "episode": episode,
            "return": round(float(np.mean([logs[a].total_reward for a in agents])), 6),
            "l_sem": round(float(np.sum([logs[a].sem_loss_per_step * logs[a].steps
                                         for a in agents])), 6),
        }
        history.append(record)
        if on_record is not None:
            on_record(record)
    return TrafficResult(models, history)


def evaluate_traffic(models: Mapping[str, RuleModel], network, episodes: int = 20,
                     seed: int | None = 0) -> float:
    """Mean per-step per-agent reward under frozen rules and greedy choices."""
    domain = Domain(network.alphabet)
    evaluator = PolicyEvaluator(domain)
    if seed is not None:
        network.rng = np.random.default_rng(np.random.SeedSequence((seed, 60872)))
    fixed = {agent: sample_step_rules(models[agent], EVAL)[0] for agent in network.intersections}
    bg = domain.encode((), network.background)
    per_step = []
    for _ in range(episodes):
        network.reset()
        done = False
        while not done:
            choices = {}
            for agent in network.intersections:
                v = bg.copy()
                for atom in network.agent_state(agent):
                    v[domain.ground_atoms.index(atom)] = 1.0
                actions = network.agent_actions(agent)
                step_eval = evaluator.evaluate(v, actions, fixed[agent])
                choices[agent] = actions[int(np.argmax(step_eval.probs))]
            rewards, done = network.advance(choices)
            per_step.append(float(np.mean(list(rewards.values()))))
    return float(np.mean(per_step))


def random_traffic_score(network, episodes: int = 20, seed: int | None = 0) -> float:
    rng = np.random.default_rng(seed)
    if seed is not None:
        network.rng = np.random.default_rng(np.random.SeedSequence((seed, 60873)))
    per_step = []
    for _ in range(episodes):
        network.reset()
        done = False
        while not done:
            choices = {}
            for agent in network.intersections:
                actions = network.agent_actions(agent)
                choices[agent] = actions[int(rng.integers(len(actions)))]
            rewards, done = network.advance(choices)
            per_step.append(float(np.mean(list(rewards.values()))))
    return float(np.mean(per_step))


def transfer_traffic_models(models: Mapping[str, RuleModel], source_net, target_net) -> dict:
    """Reuse trained rules on a new grid, matching intersections by degree.

    The variable-atom space is identical across grids, so logits copy over
    verbatim; only the constants (lanes, intersections) differ.
    """
    target_domain = Domain(target_net.alphabet)
    by_degree: dict[int, RuleModel] = {}
    for agent in sorted(models):
        by_degree.setdefault(source_net.degree(agent), models[agent])
    out = {}
    for agent in target_net.intersections:
        degree = target_net.degree(agent)
        source = by_degree.get(degree) or next(iter(by_degree.values()))
        clone = RuleModel(target_domain, {n: source.slots[n] for n in source.slots})
        for name in source.logits:
            clone.logits[name] = source.logits[name].copy()
        out[agent] = clone
    return out

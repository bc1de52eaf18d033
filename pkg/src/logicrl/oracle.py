"""Independent brute-force evaluators used for cross-checking.

`boolean_eval` decides classical satisfaction of a crisp rule by direct
substitution enumeration and set membership, sharing nothing with the
vectorized fuzzy path.  `exhaustive_rule_search` enumerates every
constraint-respecting crisp rule set up to a body-size cap on a tiny
environment, scores each greedily, and reports the optimum; it exists to
validate learned rules, not to scale.
"""

from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .inference import head_pinning
from .logic import Alphabet, Atom, Domain, Predicate, enumerate_substitutions


@dataclass(frozen=True)
class CrispRule:
    schema: Predicate
    body: frozenset[Atom]

    def __post_init__(self):
        if not self.body:
            raise ValueError("crisp rule needs a non-empty body")


def boolean_eval(
    rule: CrispRule,
    ground_action: Atom,
    state: frozenset[Atom],
    background: frozenset[Atom],
    alphabet: Alphabet,
) -> bool:
    """True iff some object-identity substitution satisfies the whole body."""
    if ground_action.predicate != rule.schema:
        raise ValueError(f"action {ground_action} does not instantiate {rule.schema}")
    pinned = head_pinning(rule.schema, ground_action, alphabet.variables)
    if pinned is None:
        return False
    facts = state | background
    body = sorted(rule.body, key=str)
    free = []
    for atom in body:
        for var in atom.variables():
            if var not in pinned and var not in free:
                free.append(var)
    for sub in enumerate_substitutions(free, pinned, alphabet.constants):
        ok = True
        for atom in body:
            holds = atom.positive().substitute(sub) in facts
            if atom.negated:
                holds = not holds
            if not holds:
                ok = False
                break
        if ok:
            return True
    return False


# -- exhaustive crisp search -------------------------------------------------


class SearchSpaceExceeded(RuntimeError):
    pass


@dataclass
class _Node:
    state: frozenset[Atom]
    background: frozenset[Atom]
    actions: tuple[Atom, ...]
    env: object
    edges: dict = field(default_factory=dict)  # action index -> (reward, done, node id)


@dataclass
class SearchResult:
    best_return: float
    policies: tuple[dict, ...]  # tied optimal rule sets, lexicographic, capped
    n_tied: int
    bodies_by_schema: dict[str, tuple[frozenset[Atom], ...]]

    def optimal_bodies(self, schema_name: str) -> tuple[frozenset[Atom], ...]:
        return self.bodies_by_schema.get(schema_name, ())


def _fork(env):
    clone = copy.copy(env)
    for key, value in vars(env).items():
        if isinstance(value, (list, dict, set)):
            setattr(clone, key, copy.deepcopy(value))
    return clone


def _expand_episodes(env, episodes: int, seed: int, max_states: int):
    """Explore every reachable decision point of a few seeded episodes."""
    nodes: list[_Node] = []
    roots: list[int] = []
    for e in range(episodes):
        env.rng = np.random.default_rng(np.random.SeedSequence((seed, e)))
        state = env.reset()
        root_env = _fork(env)
        index: dict = {}
        root = _Node(state, env.background, env.ground_actions(), root_env)
        roots.append(len(nodes))
        nodes.append(root)
        index[(state, root_env.steps_taken)] = roots[-1]
        frontier = [roots[-1]]
        while frontier:
            nid = frontier.pop()
            node = nodes[nid]
            for ai, action in enumerate(node.actions):
                branch = _fork(node.env)
                outcome = branch.step(action)
                if outcome.done:
                    node.edges[ai] = (outcome.reward, True, None)
                    continue
                key = (outcome.next_state, branch.steps_taken)
                child = index.get(key)
                if child is None:
                    child = len(nodes)
                    if child >= max_states:
                        raise SearchSpaceExceeded(
                            f"state expansion exceeded {max_states} nodes")
                    index[key] = child
                    nodes.append(_Node(outcome.next_state, branch.background,
                                       branch.ground_actions(), branch))
                    frontier.append(child)
                node.edges[ai] = (outcome.reward, False, child)
    return nodes, roots


def _candidate_bodies(pool: Sequence[Atom], max_body: int, domain: Domain,
                      forbidden: Sequence[tuple[int, ...]]):
    bodies = []
    for size in range(1, max_body + 1):
        for combo in itertools.combinations(pool, size):
            indices = frozenset(domain.variable_atoms.index(a) for a in combo)
            if any(indices >= set(t) for t in forbidden):
                continue
            bodies.append(frozenset(combo))
    return bodies


def exhaustive_rule_search(
    env,
    max_body: int,
    constraint_tuples: Sequence[tuple[int, ...]] = (),
    atom_pool: Sequence[Atom] | None = None,
    episodes: int = 6,
    seed: int = 0,
    max_states: int = 20000,
    max_policies: int = 2_000_000,
    keep: int = 50,
) -> SearchResult:
    """Best crisp rule set (one rule per schema) by full enumeration.

    Bodies behaving identically on every reachable decision point collapse
    into one class before the cross product, which keeps the joint
    enumeration tractable; classes are expanded again when reporting.
    """
    domain = Domain(env.alphabet)
    alphabet = env.alphabet
    pool = tuple(atom_pool) if atom_pool is not None else domain.variable_atoms.atoms
    bodies = _candidate_bodies(pool, max_body, domain, constraint_tuples)
    if not bodies:
        raise ValueError("no candidate bodies under the given pool and constraints")
    raw = len(bodies) ** len(alphabet.targets)
    if raw > max_policies:
        raise SearchSpaceExceeded(
            f"{raw} candidate rule sets exceed the {max_policies} guard")
    nodes, roots = _expand_episodes(env, episodes, seed, max_states)

    schemas = alphabet.targets
    class_reps: dict[str, list[list[frozenset[Atom]]]] = {}
    truth: dict[str, list[np.ndarray]] = {}
    for schema in schemas:
        pairs = []
        for nid, node in enumerate(nodes):
            for ai, action in enumerate(node.actions):
                if action.predicate == schema:
                    pairs.append((nid, ai))
        signatures: dict[bytes, int] = {}
        classes: list[list[frozenset[Atom]]] = []
        rows: list[np.ndarray] = []
        for body in sorted(bodies, key=lambda b: (len(b), sorted(str(a) for a in b))):
            rule = CrispRule(schema, body)
            sig = np.fromiter(
                (boolean_eval(rule, nodes[nid].actions[ai], nodes[nid].state,
                              nodes[nid].background, alphabet)
                 for nid, ai in pairs),
                dtype=bool, count=len(pairs))
            key = sig.tobytes()
            cls = signatures.get(key)
            if cls is None:
                signatures[key] = len(classes)
                classes.append([body])
                rows.append(sig)
            else:
                classes[cls].append(body)
        class_reps[schema.name] = classes
        full = {}
        for (nid, ai), col in zip(pairs, range(len(pairs))):
            full.setdefault(nid, {})[ai] = col
        truth[schema.name] = (rows, full)

    def rollout(choice: dict[str, int]) -> float:
        total = 0.0
        for root in roots:
            nid = root
            while nid is not None:
                node = nodes[nid]
                best_ai, best_val = 0, -1
                for ai, action in enumerate(node.actions):
                    name = action.predicate.name
                    rows, full = truth[name]
                    val = int(rows[choice[name]][full[nid][ai]])
                    if val > best_val:
                        best_ai, best_val = ai, val
                reward, done, nxt = node.edges[best_ai]
                total += reward
                nid = None if done else nxt
        return total / len(roots)

    names = [s.name for s in schemas]
    best_val = -np.inf
    best_choices: list[tuple[int, ...]] = []
    for combo in itertools.product(*(range(len(class_reps[n])) for n in names)):
        val = rollout(dict(zip(names, combo)))
        if val > best_val + 1e-12:
            best_val, best_choices = val, [combo]
        elif abs(val - best_val) <= 1e-12:
            best_choices.append(combo)

    def body_text(body) -> str:
        return ", ".join(sorted(str(a) for a in body))

    policies = []
    for combo in best_choices:
        rep = {name: class_reps[name][cls][0] for name, cls in zip(names, combo)}
        policies.append(rep)
    policies.sort(key=lambda p: tuple(body_text(p[n]) for n in names))
    bodies_by_schema = {}
    for k, name in enumerate(names):
        members: list[frozenset[Atom]] = []
        for combo in best_choices:
            for body in class_reps[name][combo[k]]:
                if body not in members:
                    members.append(body)
        bodies_by_schema[name] = tuple(sorted(members, key=body_text))
    return SearchResult(float(best_val), tuple(policies[:keep]), len(best_choices),
                        bodies_by_schema)


def crisp_policy_return(env, policy: dict[str, frozenset[Atom]], episodes: int = 6,
                        seed: int = 0) -> float:
    """Greedy return of a crisp rule set by direct environment rollout.

    Independent of the search's cached transition tree; action ties break to
    the first action, matching the fuzzy argmax convention.
    """
    rules = {name: CrispRule(env.alphabet.predicate(name), body)
             for name, body in policy.items()}
    totals = []
    for e in range(episodes):
        env.rng = np.random.default_rng(np.random.SeedSequence((seed, e)))
        state = env.reset()
        total, done = 0.0, False
        while not done:
            actions = env.ground_actions()
            values = [
                int(boolean_eval(rules[a.predicate.name], a, state, env.background,
                                 env.alphabet))
                for a in actions
            ]
            outcome = env.step(actions[int(np.argmax(values))])
            total += outcome.reward
            state, done = outcome.next_state, outcome.done
        totals.append(total)
    return float(np.mean(totals))

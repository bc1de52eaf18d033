import numpy as np
import pytest

from logicrl import Alphabet, Domain, PolicyEvaluator, RuleModel
from logicrl.gradients import StepRecord, grad_log_policy, grad_semantic_loss
from logicrl.inference import action_distribution, evaluate_rule
from logicrl.rules import sigmoid
from logicrl.training import sample_step_rules


def forward_log_pi(logits, slot_bodies, domain, v, actions, chosen):
    """Reference forward pass: log-probability of the chosen action with the
    sampled bodies held fixed.  Uses only the slow per-body grounding path."""
    values = []
    for action in actions:
        name = action.predicate.name
        slot_vals = []
        for slot, body in enumerate(slot_bodies[name]):
            P = sigmoid(logits[name][slot])
            b = np.zeros(P.size, dtype=int)
            b[body] = 1
            slot_vals.append(evaluate_rule(b, P[body], action, v, domain))
        values.append(max(slot_vals))
    return float(np.log(action_distribution(values)[chosen]))


def random_instance(rng, n_slots=2):
    ab = Alphabet(
        [("r", 0), ("s", 0), ("mv", 1)],
        [("p", 1), ("q", 2)],
        ["a", "b", "c"],
        ["X", "Y"],
    )
    domain = Domain(ab)
    model = RuleModel(domain, rules_per_schema=n_slots, init_logit=0.0, init_noise=0.0)
    for name in model.logits:
        model.logits[name] = rng.normal(1.5, 1.0, size=model.logits[name].shape)
    v = (rng.random(len(domain.ground_atoms)) < 0.7).astype(float)
    actions = (ab.atom("r"), ab.atom("s"), ab.atom("mv", "a"))
    return domain, model, v, actions


def record_step(domain, model, v, actions, chosen, rng):
    evaluator = PolicyEvaluator(domain)
    rules, samples = sample_step_rules(model, "train", rng)
    ev = evaluator.evaluate(v, actions, rules)
    record = StepRecord(
        probs=ev.probs,
        chosen=chosen,
        action_schemas=tuple(a.predicate.name for a in actions),
        action_slots=tuple(e.slot for e in ev.per_action),
        action_truth_rows=tuple(e.y_star for e in ev.per_action),
        slot_samples=samples,
    )
    slot_bodies = {name: [s.body for s in samples[name]] for name in samples}
    return record, slot_bodies


class TestPolicyGradient:
    def test_matches_central_differences(self, rng):
        h = 1e-5
        checked = 0
        for trial in range(12):
            domain, model, v, actions = random_instance(rng)
            chosen = trial % len(actions)
            record, bodies = record_step(domain, model, v, actions, chosen, rng)
            shapes = {n: arr.shape for n, arr in model.logits.items()}
            grads = grad_log_policy(record, shapes)
            for name in model.logits:
                rows, cols = model.logits[name].shape
                for slot in range(rows):
                    for j in range(cols):
                        base = model.logits[name][slot, j]
                        model.logits[name][slot, j] = base + h
                        up = forward_log_pi(model.logits, bodies, domain, v, actions, chosen)
                        model.logits[name][slot, j] = base - h
                        down = forward_log_pi(model.logits, bodies, domain, v, actions, chosen)
                        model.logits[name][slot, j] = base
                        fd = (up - down) / (2 * h)
                        analytic = grads[name][slot, j]
                        scale = max(abs(fd), abs(analytic), 1e-8)
                        if max(abs(fd), abs(analytic)) > 1e-10:
                            assert abs(fd - analytic) / scale < 1e-4, (name, slot, j)
                            checked += 1
                        else:
                            assert abs(fd - analytic) < 1e-8
        assert checked > 50  # the comparison exercised real gradient entries

    def test_single_action_gives_zero_gradient(self, rng):
        domain, model, v, actions = random_instance(rng)
        record, _ = record_step(domain, model, v, (actions[0],), 0, rng)
        grads = grad_log_policy(record, {n: a.shape for n, a in model.logits.items()})
        assert all(np.allclose(g, 0.0) for g in grads.values())

    def test_clamped_valuation_gets_no_gradient(self, toy_domain, rng):
        # a rule whose body cannot be satisfied: truth row is None
        model = RuleModel(toy_domain, init_logit=0.0, init_noise=0.0)
        v = np.zeros(len(toy_domain.ground_atoms))
        ab = toy_domain.alphabet
        actions = (ab.atom("r"), ab.atom("s"))
        record, _ = record_step(toy_domain, model, v, actions, 0, rng)
        assert all(row is None for row in record.action_truth_rows)
        grads = grad_log_policy(record, {n: a.shape for n, a in model.logits.items()})
        assert all(np.allclose(g, 0.0) for g in grads.values())

    def test_unselected_atoms_get_no_gradient(self, rng):
        domain, model, v, actions = random_instance(rng, n_slots=1)
        record, _ = record_step(domain, model, v, actions, 0, rng)
        grads = grad_log_policy(record, {n: a.shape for n, a in model.logits.items()})
        for name, g in grads.items():
            body = record.slot_samples[name][0].body
            outside = np.setdiff1d(np.arange(g.shape[1]), body)
            assert np.allclose(g[0, outside], 0.0)

    def test_expected_score_is_zero(self, rng):
        # sum over actions of pi(a) * grad log pi(a) vanishes
        domain, model, v, actions = random_instance(rng)
        shapes = {n: a.shape for n, a in model.logits.items()}
        total = {n: np.zeros(s) for n, s in shapes.items()}
        evaluator = PolicyEvaluator(domain)
        rules, samples = sample_step_rules(model, "train", rng)
        ev = evaluator.evaluate(v, actions, rules)
        for chosen in range(len(actions)):
            record = StepRecord(
                probs=ev.probs,
                chosen=chosen,
                action_schemas=tuple(a.predicate.name for a in actions),
                action_slots=tuple(e.slot for e in ev.per_action),
                action_truth_rows=tuple(e.y_star for e in ev.per_action),
                slot_samples=samples,
            )
            g = grad_log_policy(record, shapes)
            for name in total:
                total[name] += ev.probs[chosen] * g[name]
        assert all(np.allclose(t, 0.0, atol=1e-12) for t in total.values())

    def test_chosen_action_mismatch_rejected(self, rng):
        domain, model, v, actions = random_instance(rng)
        record, _ = record_step(domain, model, v, actions, 1, rng)
        with pytest.raises(ValueError):
            grad_log_policy(record, {n: a.shape for n, a in model.logits.items()}, action=0)


class TestSemanticGradient:
    def test_worked_pair_partials(self):
        # loss P1*P4 = 0.56; dL/dP1 = 0.7 and dL/dP4 = 0.8, chained through
        # the logistic derivative
        P = np.array([[0.1, 0.8, 0.3, 0.4, 0.7, 0.2]])
        grads = grad_semantic_loss({"r": P}, [(1, 4)])
        assert grads["r"][0, 1] == pytest.approx(0.7 * 0.8 * 0.2)
        assert grads["r"][0, 4] == pytest.approx(0.8 * 0.7 * 0.3)
        assert np.count_nonzero(grads["r"]) == 2

    def test_empty_constraints_zero(self):
        grads = grad_semantic_loss({"r": np.array([[0.5, 0.5]])}, [])
        assert np.allclose(grads["r"], 0.0)

    def test_zero_member_blocks_other_members(self):
        P = np.array([[0.0, 0.9, 0.9]])
        grads = grad_semantic_loss({"r": P}, [(0, 1, 2)])
        assert grads["r"][0, 1] == 0.0 and grads["r"][0, 2] == 0.0
        assert grads["r"][0, 0] == pytest.approx(0.81 * 0.0)  # sigmoid'(logit of 0) -> 0

    def test_matches_central_differences(self, rng):
        from logicrl.constraints import semantic_loss

        h = 1e-6
        for _ in range(10):
            logits = {"a": rng.normal(0, 1.5, size=(2, 6)), "b": rng.normal(0, 1.5, size=(1, 6))}
            tuples = [tuple(sorted(rng.choice(6, size=k, replace=False)))
                      for k in (2, 2, 3)]
            probs = {n: sigmoid(L) for n, L in logits.items()}
            grads = grad_semantic_loss(probs, tuples)

            def loss_of(ls):
                flat = [sigmoid(row) for L in ls.values() for row in L]
                return semantic_loss(flat, tuples)

            for name in logits:
                for slot in range(logits[name].shape[0]):
                    for j in range(6):
                        base = logits[name][slot, j]
                        logits[name][slot, j] = base + h
                        up = loss_of(logits)
                        logits[name][slot, j] = base - h
                        down = loss_of(logits)
                        logits[name][slot, j] = base
                        fd = (up - down) / (2 * h)
                        analytic = grads[name][slot, j]
                        scale = max(abs(fd), abs(analytic), 1e-8)
                        assert abs(fd - analytic) / scale < 1e-4

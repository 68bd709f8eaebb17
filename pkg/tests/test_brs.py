import json
import math

import numpy as np
import pytest

from cytorules.brs import (
    Condition,
    Rule,
    RuleSet,
    SaSchedule,
    candidate_conditions,
    evaluate,
    learn,
    log_posterior,
    predict,
)
from cytorules.chart import feature_vector, variable_index
from cytorules.dataset import ClassLabel
from cytorules.errors import DegenerateLabels, EmptyTrainingSet, InvalidSpec


from helpers import chart_with, published_ruleset


class TestEvaluate:
    def test_rule_one_fires(self):
        vec = feature_vector(chart_with(True, True, False))
        fired_any, fired = evaluate(published_ruleset(), vec)
        assert fired_any and fired == [0]

    def test_no_clause_satisfied(self):
        vec = feature_vector(chart_with(False, False, False))
        fired_any, fired = evaluate(published_ruleset(), vec)
        assert not fired_any and fired == []

    def test_boundary_is_inclusive_for_leq(self):
        rs = RuleSet(rules=[Rule([Condition(variable_index("D7/D12"), "<=", 0.4)])])
        x = np.zeros(78)
        x[variable_index("D7/D12")] = 0.4
        fired_any, fired = evaluate(rs, x)
        assert fired_any and fired == [0]

    def test_truth_table_of_published_conditions(self):
        rs = published_ruleset()
        for c1 in (False, True):
            for c2 in (False, True):
                for c3 in (False, True):
                    vec = feature_vector(chart_with(c1, c2, c3))
                    fired_any, _ = evaluate(rs, vec)
                    assert fired_any == ((c1 and c2) or c3)

    def test_empty_condition_list_rejected(self):
        with pytest.raises(InvalidSpec):
            Rule([]).validate()

    def test_monotone_in_added_rules(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            x = rng.random(78)
            rules = [
                Rule([Condition(int(rng.integers(78)), ">", float(rng.random()))])
                for _ in range(3)
            ]
            base = RuleSet(rules=rules[:2])
            extended = RuleSet(rules=rules)
            if evaluate(base, x)[0]:
                assert evaluate(extended, x)[0]


class TestCandidateConditions:
    def test_constant_variable_collapses(self):
        x = np.column_stack([np.full(20, 5.0), np.arange(20.0)])
        conds = [c for c in candidate_conditions(x) if c.variable_index == 0]
        assert len(conds) == 2
        assert {c.op for c in conds} == {">", "<="}

    def test_single_level_median(self):
        x = np.arange(1.0, 11.0)[:, None]
        conds = candidate_conditions(x, levels=(0.5,))
        assert len(conds) == 2
        assert all(c.threshold == np.quantile(x[:, 0], 0.5) for c in conds)

    def test_counting_bound(self):
        rng = np.random.default_rng(1)
        conds = candidate_conditions(rng.random((30, 78)))
        assert len(conds) <= 78 * 9 * 2

    def test_requires_two_rows(self):
        with pytest.raises(EmptyTrainingSet):
            candidate_conditions(np.zeros((1, 78)))


class TestLogPosterior:
    def test_redundant_rule_scores_strictly_lower(self):
        rng = np.random.default_rng(2)
        x = rng.random((40, 3))
        y = (x[:, 0] > 0.5).astype(float)
        exact = RuleSet(rules=[Rule([Condition(0, ">", 0.5)])])
        padded = RuleSet(
            rules=[Rule([Condition(0, ">", 0.5)]), Rule([Condition(1, ">", 99.0)])]
        )
        n_cand = 20
        s_exact = log_posterior(exact, x, y, n_candidates=n_cand)
        s_padded = log_posterior(padded, x, y, n_candidates=n_cand)
        assert s_exact > s_padded

    def test_zero_coverage_all_negative_closed_form(self):
        n = 30
        x = np.linspace(0, 1, n)[:, None]
        y = np.zeros(n)
        rs = RuleSet(rules=[Rule([Condition(0, ">", 2.0)])])  # covers nothing
        n_cand = 12
        got = log_posterior(rs, x, y, n_candidates=n_cand)
        # independent closed form via gamma functions
        lgam = math.lgamma
        lik = (lgam(1) + lgam(n + 100) - lgam(n + 101)) - (lgam(1) + lgam(100) - lgam(101))
        prior = (math.log(3.0) - 3.0 - lgam(2)) - math.log(2) - math.log(math.comb(n_cand, 1))
        assert abs(got - (lik + prior)) < 1e-9

    def test_same_coverage_same_profile_same_score(self):
        x = np.array([[0.1], [0.1], [0.9], [0.9]])
        y = np.array([0.0, 0.0, 1.0, 1.0])
        a = RuleSet(rules=[Rule([Condition(0, ">", 0.3)])])
        b = RuleSet(rules=[Rule([Condition(0, ">", 0.7)])])
        assert log_posterior(a, x, y, n_candidates=9) == log_posterior(b, x, y, n_candidates=9)


def margin_planted(n=200, seed=7):
    """Positives are exactly v3 > 0.5, with no mass in (0.45, 0.55)."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(n, 8))
    half = n // 2
    x[:half, 3] = rng.uniform(0.0, 0.45, size=half)
    x[half:, 3] = rng.uniform(0.55, 1.0, size=n - half)
    y = (x[:, 3] > 0.5).astype(float)
    return x, y


class TestLearn:
    def test_recovers_planted_rule(self):
        x, y = margin_planted()
        rs = learn(x, y, schedule=SaSchedule(iterations=3000, seed=0))
        covered = np.zeros(x.shape[0], dtype=bool)
        for rule in rs.rules:
            covered |= rule.holds(x)
        assert np.mean(covered == (y > 0.5)) >= 0.98
        assert len(rs.rules) <= 2

    def test_zero_iterations_returns_best_greedy_rule(self):
        x, y = margin_planted(n=80, seed=8)
        rs = learn(x, y, schedule=SaSchedule(iterations=0, seed=1))
        assert len(rs.rules) == 1
        cands = candidate_conditions(x)
        best = max(
            log_posterior(RuleSet(rules=[Rule([c])]), x, y, n_candidates=len(cands))
            for c in cands
        )
        got = log_posterior(rs, x, y, n_candidates=len(cands))
        assert abs(got - best) < 1e-12

    def test_deterministic_given_seed(self):
        x, y = margin_planted(n=120, seed=9)
        sched = SaSchedule(iterations=1500, seed=3)
        assert learn(x, y, schedule=sched).to_json() == learn(x, y, schedule=sched).to_json()

    def test_rules_trace_back_to_candidate_pool(self):
        x, y = margin_planted(n=120, seed=10)
        pool = {
            (c.variable_index, c.op, c.threshold) for c in candidate_conditions(x)
        }
        rs = learn(x, y, schedule=SaSchedule(iterations=2000, seed=4))
        for rule in rs.rules:
            assert 1 <= len(rule.conditions) <= 2
            for cond in rule.conditions:
                assert (cond.variable_index, cond.op, cond.threshold) in pool

    def test_best_score_trace_non_decreasing(self):
        x, y = margin_planted(n=100, seed=11)
        trace = []
        learn(x, y, schedule=SaSchedule(iterations=2000, seed=5), trace=trace)
        assert len(trace) == 2000
        assert all(b >= a for a, b in zip(trace, trace[1:]))

    def test_degenerate_labels(self):
        x = np.random.default_rng(0).random((20, 4))
        with pytest.raises(DegenerateLabels):
            learn(x, np.ones(20))


class TestPredict:
    def test_positive_and_negative_labels(self):
        rs = published_ruleset()
        pos_vec = feature_vector(chart_with(True, True, False))
        neg_vec = feature_vector(chart_with(False, False, False))
        assert predict(rs, pos_vec)[0] == ClassLabel.CLASS2
        assert predict(rs, neg_vec)[0] == ClassLabel.CLASS1

    def test_slack_arithmetic(self):
        cond = Condition(0, "<=", 0.07)
        x = np.zeros(78)
        x[0] = 0.05
        assert abs(cond.slack(x) - 0.02) < 1e-12
        gt = Condition(3, ">", 1.5)
        x[3] = 3.0
        assert abs(gt.slack(x) - 1.5) < 1e-12

    def test_detail_reports_every_condition(self):
        rs = published_ruleset()
        vec = feature_vector(chart_with(True, True, True))
        label, fired, detail = predict(rs, vec)
        assert fired == [0, 1]
        assert len(detail) == 2
        assert all(entry["satisfied"] for entry in detail[0])


def test_ruleset_json_round_trip():
    rs = published_ruleset()
    doc = json.loads(json.dumps(rs.to_json()))
    again = RuleSet.from_json(doc)
    assert again.to_json() == rs.to_json()
    assert "D6/D11 > 1.50" in rs.render()
    assert "OR" in rs.render()


def test_duplicate_condition_within_rule_rejected():
    with pytest.raises(InvalidSpec):
        Rule([Condition(0, ">", 0.1), Condition(0, ">", 0.2)]).validate()

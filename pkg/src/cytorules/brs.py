"""Bayesian rule-set classifier over density feature vectors.

A rule set is an OR of conjunctive rules, each rule an AND of at most two
threshold conditions on the 78 density variables. Rule sets are scored by a
beta-Bernoulli coverage likelihood plus a complexity prior (Poisson on rule
count, uniform over candidate conjunctions given length) and searched with
simulated annealing over add/remove/mutate moves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln

from .chart import variable_name
from .dataset import ClassLabel
from .errors import DegenerateLabels, EmptyTrainingSet, InvalidSpec

OPS = (">", "<=")
DEFAULT_LEVELS = tuple(np.round(np.arange(0.1, 0.91, 0.1), 2))


@dataclass(frozen=True)
class Condition:
    variable_index: int
    op: str  # ">" or "<="
    threshold: float

    def __post_init__(self):
        if self.op not in OPS:
            raise InvalidSpec(f"operator must be one of {OPS}")

    def holds(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        col = x[..., self.variable_index]
        return col > self.threshold if self.op == ">" else col <= self.threshold

    def slack(self, x) -> float:
        """Signed margin; positive once the condition is satisfied."""
        v = float(np.asarray(x, dtype=np.float64)[self.variable_index])
        return v - self.threshold if self.op == ">" else self.threshold - v

    def render(self) -> str:
        shown = f"{self.threshold:.2f}"
        if float(shown) == 0.0 and self.threshold != 0.0:
            shown = repr(self.threshold)
        return f"{variable_name(self.variable_index)} {self.op} {shown}"

    def to_json(self) -> dict:
        return {
            "variable": self.variable_index,
            "name": variable_name(self.variable_index),
            "op": self.op,
            "threshold": self.threshold,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Condition":
        return cls(
            variable_index=int(doc["variable"]),
            op=doc["op"],
            threshold=float(doc["threshold"]),
        )


@dataclass
class Rule:
    conditions: list[Condition]

    def validate(self, max_len: int = 2) -> "Rule":
        if not 1 <= len(self.conditions) <= max_len:
            raise InvalidSpec(f"rule must have 1..{max_len} conditions")
        seen = {(c.variable_index, c.op) for c in self.conditions}
        if len(seen) < len(self.conditions):
            raise InvalidSpec("duplicate variable/operator pair within a rule")
        return self

    def holds(self, x) -> np.ndarray:
        out = self.conditions[0].holds(x)
        for cond in self.conditions[1:]:
            out = out & cond.holds(x)
        return out

    def render(self) -> str:
        return " AND ".join(c.render() for c in self.conditions)


@dataclass
class RuleSet:
    rules: list[Rule]
    positive_class: ClassLabel = ClassLabel.CLASS2

    def render(self) -> str:
        return "\nOR\n".join(r.render() for r in self.rules)

    def to_json(self) -> dict:
        return {
            "positive_class": self.positive_class.value,
            "rules": [{"conditions": [c.to_json() for c in r.conditions]} for r in self.rules],
            "text": self.render(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RuleSet":
        rules = [
            Rule([Condition.from_json(c) for c in r["conditions"]]).validate(max_len=99)
            for r in doc["rules"]
        ]
        return cls(rules=rules, positive_class=ClassLabel(int(doc["positive_class"])))


def evaluate(ruleset: RuleSet, x) -> tuple[bool, list[int]]:
    """OR-of-ANDs evaluation; returns every fired rule index (0-based)."""
    fired = [i for i, rule in enumerate(ruleset.rules) if bool(np.all(rule.holds(x)))]
    return bool(fired), fired


def predict(ruleset: RuleSet, x):
    """Classify one feature vector and report rule-level evidence.

    Returns (label, fired_rule_indices, detail) where detail holds one entry
    per rule and condition with the satisfied flag and the signed slack used
    for boundary-proximity display.
    """
    is_positive, fired = evaluate(ruleset, x)
    label = ruleset.positive_class if is_positive else ruleset.positive_class.other()
    detail = []
    for rule in ruleset.rules:
        detail.append(
            [
                {
                    "condition": cond.render(),
                    "satisfied": bool(cond.holds(x)),
                    "slack": cond.slack(x),
                }
                for cond in rule.conditions
            ]
        )
    return label, fired, detail


# ---------------------------------------------------------------------------
# Candidate conditions
# ---------------------------------------------------------------------------


def candidate_conditions(train_x: np.ndarray, levels=DEFAULT_LEVELS) -> list[Condition]:
    """Threshold candidates at per-variable empirical quantiles.

    Duplicate quantile values collapse to one threshold; both operators are
    emitted for every threshold.
    """
    x = np.asarray(train_x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise EmptyTrainingSet("need at least 2 training rows")
    out = []
    for var in range(x.shape[1]):
        thresholds = np.unique(np.quantile(x[:, var], levels))
        for t in thresholds:
            for op in OPS:
                out.append(Condition(variable_index=var, op=op, threshold=float(t)))
    return out


# ---------------------------------------------------------------------------
# Posterior score
# ---------------------------------------------------------------------------


@dataclass
class BrsPrior:
    alpha_plus: float = 100.0
    beta_plus: float = 1.0
    alpha_minus: float = 1.0
    beta_minus: float = 100.0
    rule_count_lambda: float = 3.0


@dataclass
class SaSchedule:
    iterations: int = 5000
    t0: float = 1.0
    cooling: float = 0.999
    seed: int = 0


def _log_likelihood(covered, y, prior: BrsPrior) -> float:
    tp = int(np.count_nonzero(covered & y))
    fp = int(np.count_nonzero(covered & ~y))
    fn = int(np.count_nonzero(~covered & y))
    tn = int(np.count_nonzero(~covered & ~y))
    return float(
        betaln(tp + prior.alpha_plus, fp + prior.beta_plus)
        - betaln(prior.alpha_plus, prior.beta_plus)
        + betaln(fn + prior.alpha_minus, tn + prior.beta_minus)
        - betaln(prior.alpha_minus, prior.beta_minus)
    )


def _log_prior(rule_lengths, n_candidates: int, max_len: int, prior: BrsPrior) -> float:
    m = len(rule_lengths)
    lam = prior.rule_count_lambda
    out = m * math.log(lam) - lam - math.lgamma(m + 1)
    for length in rule_lengths:
        out -= math.log(max_len)  # uniform over rule lengths 1..max_len
        out -= math.log(math.comb(n_candidates, length))  # uniform over conjunctions
    return out


def log_posterior(
    ruleset: RuleSet,
    train_x: np.ndarray,
    train_y: np.ndarray,
    prior: BrsPrior | None = None,
    n_candidates: int | None = None,
    max_len: int = 2,
) -> float:
    """Log beta-Bernoulli marginal likelihood plus complexity log-prior.

    n_candidates defaults to the size of the decile candidate pool mined
    from train_x, so standalone scores match what learn() optimizes.
    """
    prior = prior or BrsPrior()
    x = np.asarray(train_x, dtype=np.float64)
    y = np.asarray(train_y, dtype=bool)
    if n_candidates is None:
        n_candidates = len(candidate_conditions(x))
    covered = np.zeros(x.shape[0], dtype=bool)
    for rule in ruleset.rules:
        covered |= rule.holds(x)
    lengths = [len(r.conditions) for r in ruleset.rules]
    return _log_likelihood(covered, y, prior) + _log_prior(lengths, n_candidates, max_len, prior)


# ---------------------------------------------------------------------------
# Simulated-annealing search
# ---------------------------------------------------------------------------


class _SearchState:
    """Coverage bookkeeping: rules as tuples of candidate indices."""

    def __init__(self, cond_cov: np.ndarray, y: np.ndarray, prior, n_candidates, max_len):
        self.cond_cov = cond_cov
        self.y = y
        self.prior = prior
        self.n_candidates = n_candidates
        self.max_len = max_len

    def rule_cov(self, rule: tuple[int, ...]) -> np.ndarray:
        cov = self.cond_cov[rule[0]]
        for idx in rule[1:]:
            cov = cov & self.cond_cov[idx]
        return cov

    def score(self, rules: list[tuple[int, ...]]) -> float:
        covered = np.zeros(self.y.shape[0], dtype=bool)
        for rule in rules:
            covered |= self.rule_cov(rule)
        return _log_likelihood(covered, self.y, self.prior) + _log_prior(
            [len(r) for r in rules], self.n_candidates, self.max_len, self.prior
        )


def _sample_rule(candidates, pool_idx, rng, max_len) -> tuple[int, ...]:
    length = int(rng.integers(1, max_len + 1))
    picked = []
    used = set()
    order = rng.permutation(len(pool_idx))
    for pos in order:
        idx = int(pool_idx[pos])
        key = (candidates[idx].variable_index, candidates[idx].op)
        if key in used:
            continue
        picked.append(idx)
        used.add(key)
        if len(picked) == length:
            break
    return tuple(sorted(picked))


def learn(
    train_x: np.ndarray,
    train_y: np.ndarray,
    prior: BrsPrior | None = None,
    schedule: SaSchedule | None = None,
    max_len: int = 2,
    positive_class: ClassLabel = ClassLabel.CLASS2,
    candidates: list[Condition] | None = None,
    levels=DEFAULT_LEVELS,
    trace: list | None = None,
) -> RuleSet:
    """Simulated-annealing search for the maximum-posterior rule set.

    Moves: add a rule (biased toward covering a currently missed positive),
    remove a rule, or mutate one condition. Proposals are accepted with
    probability min(1, exp(dscore / T)); the best-so-far rule set is
    returned. Deterministic for a fixed schedule seed.
    """
    prior = prior or BrsPrior()
    schedule = schedule or SaSchedule()
    x = np.asarray(train_x, dtype=np.float64)
    y = np.asarray(train_y, dtype=bool)
    if y.all() or not y.any():
        raise DegenerateLabels("training labels contain a single class")
    if candidates is None:
        candidates = candidate_conditions(x, levels)
    if not candidates:
        raise EmptyTrainingSet("empty candidate pool")

    cond_cov = np.stack([c.holds(x) for c in candidates])
    state = _SearchState(cond_cov, y, prior, len(candidates), max_len)
    rng = np.random.default_rng(schedule.seed)

    # greedy single-condition start
    scores = [state.score([(i,)]) for i in range(len(candidates))]
    start = int(np.argmax(scores))
    current = [(start,)]
    cur_score = scores[start]
    best, best_score = list(current), cur_score

    all_idx = np.arange(len(candidates))
    temperature = schedule.t0
    for _ in range(schedule.iterations):
        proposal = [tuple(r) for r in current]
        kind = rng.random()
        if kind < 0.4:  # add
            covered = np.zeros(y.shape[0], dtype=bool)
            for rule in current:
                covered |= state.rule_cov(rule)
            missed = np.nonzero(y & ~covered)[0]
            if missed.size:
                row = int(missed[int(rng.integers(missed.size))])
                pool = np.nonzero(cond_cov[:, row])[0]
                if pool.size == 0:
                    pool = all_idx
            else:
                pool = all_idx
            new_rule = _sample_rule(candidates, pool, rng, max_len)
            if new_rule:
                proposal.append(new_rule)
        elif kind < 0.7 and len(current) > 1:  # remove
            del proposal[int(rng.integers(len(proposal)))]
        else:  # mutate one rule: replace, grow, or shrink by one condition
            r_idx = int(rng.integers(len(proposal)))
            rule = list(proposal[r_idx])
            action = rng.random()
            if action < 0.4 and len(rule) < max_len:  # grow
                for _attempt in range(8):
                    extra = int(rng.integers(len(candidates)))
                    trial = rule + [extra]
                    keys = {(candidates[i].variable_index, candidates[i].op) for i in trial}
                    if len(keys) == len(trial):
                        proposal[r_idx] = tuple(sorted(trial))
                        break
            elif action < 0.6 and len(rule) >= 2:  # shrink
                del rule[int(rng.integers(len(rule)))]
                proposal[r_idx] = tuple(rule)
            else:  # replace one condition
                c_pos = int(rng.integers(len(rule)))
                for _attempt in range(8):
                    repl = int(rng.integers(len(candidates)))
                    trial = list(rule)
                    trial[c_pos] = repl
                    keys = {(candidates[i].variable_index, candidates[i].op) for i in trial}
                    if len(keys) == len(trial):
                        proposal[r_idx] = tuple(sorted(trial))
                        break

        prop_score = state.score(proposal)
        delta = prop_score - cur_score
        if delta >= 0 or rng.random() < math.exp(delta / max(temperature, 1e-12)):
            current, cur_score = proposal, prop_score
            if cur_score > best_score:
                best, best_score = list(current), cur_score
        temperature *= schedule.cooling
        if trace is not None:
            trace.append(best_score)

    rules = [Rule([candidates[i] for i in rule]).validate(max_len) for rule in best]
    return RuleSet(rules=rules, positive_class=positive_class)

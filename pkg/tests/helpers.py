"""Shared fixtures-by-hand for the rule-set tests and acceptance suite."""

import numpy as np

from cytorules.brs import Condition, Rule, RuleSet
from cytorules.chart import DensityChart
from cytorules.dataset import ClassLabel
from cytorules.chart import variable_index


def published_ruleset() -> RuleSet:
    """The three-condition set: D6/D11 > 1.5 AND D1 <= 0.07, OR D7/D12 <= 0.4."""
    return RuleSet(
        rules=[
            Rule(
                [
                    Condition(variable_index("D6/D11"), ">", 1.5),
                    Condition(variable_index("D1"), "<=", 0.07),
                ]
            ).validate(),
            Rule([Condition(variable_index("D7/D12"), "<=", 0.4)]).validate(),
        ],
        positive_class=ClassLabel.CLASS2,
    )


def chart_with(c1: bool, c2: bool, c3: bool) -> DensityChart:
    """Hand-built 12-sector chart hitting a given condition combination."""
    d = np.zeros(12)
    d[5], d[10] = (0.15, 0.05) if c1 else (0.05, 0.05)  # D6/D11: 3.0 or 1.0
    d[0] = 0.05 if c2 else 0.20  # D1
    d[6], d[11] = (0.02, 0.10) if c3 else (0.10, 0.10)  # D7/D12: 0.2 or 1.0
    rest = 1.0 - d.sum()
    for idx in (1, 2, 3, 4, 7, 8, 9):
        d[idx] = rest / 7
    return DensityChart(densities=d, cell_count=1000, slide_id="hand")

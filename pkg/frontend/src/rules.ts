// Rule panel: per-slide evaluation of the learned rule set with fired-rule
// highlighting and a near-boundary badge on small slacks.

import type { ExplainPayload } from "./types.js";

export const NEAR_BOUNDARY_SLACK = 0.05;

export interface ConditionRow {
  text: string;
  satisfied: boolean;
  slack: number;
  nearBoundary: boolean;
}

export interface RuleRow {
  ruleNumber: number;
  fired: boolean;
  conditions: ConditionRow[];
}

export interface RulePanelModel {
  predictedClass: number;
  positiveClass: number;
  isPositive: boolean;
  rules: RuleRow[];
}

export function nearBoundary(slack: number, threshold = NEAR_BOUNDARY_SLACK): boolean {
  return Math.abs(slack) < threshold;
}

export function buildRulePanelModel(explain: ExplainPayload): RulePanelModel {
  const fired = new Set(explain.fired_rules);
  return {
    predictedClass: explain.predicted_class,
    positiveClass: explain.positive_class,
    isPositive: explain.predicted_class === explain.positive_class,
    rules: explain.rules.map((rule) => ({
      ruleNumber: rule.rule_number,
      fired: fired.has(rule.rule_number),
      conditions: rule.conditions.map((cond) => ({
        text: cond.condition,
        satisfied: cond.satisfied,
        slack: cond.slack,
        nearBoundary: nearBoundary(cond.slack),
      })),
    })),
  };
}

export function renderRulePanel(container: HTMLElement, model: RulePanelModel): void {
  container.replaceChildren();
  const verdict = document.createElement("div");
  verdict.className = `verdict ${model.isPositive ? "positive" : "negative"}`;
  verdict.textContent = `predicted: class ${model.predictedClass}` + (model.isPositive ? " (rule fired)" : " (no rule fired)");
  container.appendChild(verdict);

  model.rules.forEach((rule, idx) => {
    if (idx > 0) {
      const or = document.createElement("div");
      or.className = "rule-or";
      or.textContent = "OR";
      container.appendChild(or);
    }
    const block = document.createElement("div");
    block.className = rule.fired ? "rule fired" : "rule";
    const head = document.createElement("div");
    head.className = "rule-head";
    head.textContent = `rule ${rule.ruleNumber}` + (rule.fired ? " — fired" : "");
    block.appendChild(head);
    for (const cond of rule.conditions) {
      const line = document.createElement("div");
      line.className = cond.satisfied ? "cond ok" : "cond";
      const slack = document.createElement("span");
      slack.className = "slack";
      slack.textContent = `slack ${cond.slack >= 0 ? "+" : ""}${cond.slack.toFixed(3)}`;
      line.textContent = `${cond.satisfied ? "✓" : "✗"} ${cond.text} `;
      line.appendChild(slack);
      if (cond.nearBoundary) {
        const badge = document.createElement("span");
        badge.className = "badge";
        badge.textContent = "near boundary";
        line.appendChild(badge);
      }
      block.appendChild(line);
    }
    container.appendChild(block);
  });
}

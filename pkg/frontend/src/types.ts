// Payload shapes of the slide-exploration HTTP API.

export interface SlideInfo {
  slide_id: string;
  patient_id: string;
  label: number | null;
  cell_count: number;
  synthetic: boolean;
}

export interface ChartPayload {
  slide_id: string;
  densities: number[];
  cell_count: number;
}

export interface SlidePoint {
  cell_id: string;
  x: number;
  y: number;
}

export interface PointsPayload {
  slide_id: string;
  points: SlidePoint[];
}

export interface ConditionDetail {
  condition: string;
  satisfied: boolean;
  slack: number;
}

export interface RuleDetail {
  rule_number: number;
  text: string;
  conditions: ConditionDetail[];
}

export interface ExplainPayload {
  slide_id: string;
  chart: ChartPayload;
  features: number[];
  predicted_class: number;
  positive_class: number;
  fired_rules: number[];
  rules: RuleDetail[];
}

export interface RulesetCondition {
  variable: number;
  name: string;
  op: string;
  threshold: number;
}

export interface RulesetPayload {
  positive_class: number;
  rules: { conditions: RulesetCondition[] }[];
  text: string;
}

export interface NearestCell {
  cell_id: string;
  slide_id: string;
  distance: number;
  x: number;
  y: number;
  thumbnail_ref: string | null;
}

export interface NearestQuery {
  x: number;
  y: number;
  k?: number;
  slide_id?: string | null;
}

export interface NearestPayload {
  query: { x: number; y: number; k: number };
  cells: NearestCell[];
}

export interface ApiError {
  code: string;
  message: string;
}

// Class-level aggregate charts, display math only: the mean of per-slide
// density charts, computed client-side. The service never sees these.

import type { ChartPayload } from "./types.js";

export function averageCharts(charts: ChartPayload[], label: string): ChartPayload {
  if (charts.length === 0) {
    throw new Error("cannot average zero charts");
  }
  const n = charts[0]!.densities.length;
  const densities = new Array<number>(n).fill(0);
  let cells = 0;
  for (const chart of charts) {
    if (chart.densities.length !== n) {
      throw new Error("chart length mismatch");
    }
    for (let k = 0; k < n; k++) {
      densities[k]! += chart.densities[k]! / charts.length;
    }
    cells += chart.cell_count;
  }
  return { slide_id: label, densities, cell_count: cells };
}

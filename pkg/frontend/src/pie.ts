// Canvas rendering of the 12-sector density chart with the slide's cell
// cloud and the current query marker.

import {
  Frame,
  SECTOR_COUNT,
  discRadius,
  formatDensity,
  sectorSpan,
  unitToPixel,
} from "./geometry.js";
import type { ChartPayload, SlidePoint } from "./types.js";

export interface PieView {
  chart: ChartPayload;
  points: SlidePoint[];
  marker: { x: number; y: number } | null;
  highlightSector: number | null;
}

function sectorFill(density: number, maxDensity: number, highlighted: boolean): string {
  const t = maxDensity > 0 ? density / maxDensity : 0;
  const alpha = 0.08 + 0.72 * t;
  return highlighted ? `rgba(214, 106, 32, ${alpha})` : `rgba(42, 98, 156, ${alpha})`;
}

export function renderPie(ctx: CanvasRenderingContext2D, frame: Frame, view: PieView): void {
  const r = discRadius(frame);
  const center = unitToPixel(frame, 0, 0);
  ctx.clearRect(0, 0, frame.size, frame.size);

  const maxDensity = Math.max(...view.chart.densities);
  for (let k = 0; k < SECTOR_COUNT; k++) {
    const span = sectorSpan(k);
    ctx.beginPath();
    ctx.moveTo(center.px, center.py);
    // canvas y grows downward, so math angle theta draws at -theta
    ctx.arc(center.px, center.py, r, -span.end, -span.start);
    ctx.closePath();
    ctx.fillStyle = sectorFill(view.chart.densities[k] ?? 0, maxDensity, view.highlightSector === k);
    ctx.fill();
    ctx.strokeStyle = "rgba(0,0,0,0.25)";
    ctx.lineWidth = 1;
    ctx.stroke();
  }

  ctx.beginPath();
  ctx.arc(center.px, center.py, r, 0, 2 * Math.PI);
  ctx.strokeStyle = "#333";
  ctx.lineWidth = 1.5;
  ctx.stroke();

  // numeric labels at the sector mid-angles
  ctx.font = "11px sans-serif";
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  ctx.fillStyle = "#222";
  for (let k = 0; k < SECTOR_COUNT; k++) {
    const mid = (sectorSpan(k).start + sectorSpan(k).end) / 2;
    const at = unitToPixel(frame, 0.78 * Math.cos(mid), 0.78 * Math.sin(mid));
    ctx.fillText(`D${k + 1}`, at.px, at.py - 7);
    ctx.fillText(formatDensity(view.chart.densities[k] ?? 0), at.px, at.py + 7);
  }

  ctx.fillStyle = "rgba(20, 20, 20, 0.55)";
  for (const point of view.points) {
    const at = unitToPixel(frame, point.x, point.y);
    ctx.fillRect(at.px - 1, at.py - 1, 2, 2);
  }

  if (view.marker) {
    const at = unitToPixel(frame, view.marker.x, view.marker.y);
    ctx.strokeStyle = "#0a7d28";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(at.px - 7, at.py);
    ctx.lineTo(at.px + 7, at.py);
    ctx.moveTo(at.px, at.py - 7);
    ctx.lineTo(at.px, at.py + 7);
    ctx.stroke();
  }
}

// App wiring: slide picker, clickable pie-chart canvas, nearest-cell
// gallery, and the rule panel. All numerics come from the service.

import { averageCharts } from "./aggregate.js";
import { ApiClient, ServiceError } from "./api.js";
import {
  Frame,
  clampToDisc,
  formatDensity,
  pixelToUnit,
  sectorAtPixel,
} from "./geometry.js";
import { renderGallery } from "./gallery.js";
import { PieView, renderPie } from "./pie.js";
import { buildRulePanelModel, renderRulePanel } from "./rules.js";
import type { ChartPayload, ExplainPayload, SlidePoint } from "./types.js";

const DEFAULT_BASE_URL = "http://127.0.0.1:8750";

const canvas = document.querySelector<HTMLCanvasElement>("#pie")!;
const slidePicker = document.querySelector<HTMLSelectElement>("#slide-picker")!;
const baseUrlInput = document.querySelector<HTMLInputElement>("#base-url")!;
const hoverInfo = document.querySelector<HTMLDivElement>("#hover-info")!;
const galleryBox = document.querySelector<HTMLDivElement>("#gallery")!;
const rulesBox = document.querySelector<HTMLDivElement>("#rules")!;
const statusBox = document.querySelector<HTMLDivElement>("#status")!;
const onlyThisSlide = document.querySelector<HTMLInputElement>("#only-this-slide")!;

const frame: Frame = { size: canvas.width, margin: 16 };
const ctx = canvas.getContext("2d")!;

const CLASS_AVG_PREFIX = "__class_avg_";

let api = new ApiClient(baseUrlInput.value || DEFAULT_BASE_URL);
let slideIdsByLabel = new Map<number, string[]>();
let currentChart: ChartPayload | null = null;
let currentPoints: SlidePoint[] = [];
let currentExplain: ExplainPayload | null = null;
let marker: { x: number; y: number } | null = null;
let highlightSector: number | null = null;
let aggregateMode = false;

function toast(message: string, isError = false): void {
  statusBox.textContent = message;
  statusBox.className = isError ? "status error" : "status";
  if (message) {
    setTimeout(() => {
      if (statusBox.textContent === message) statusBox.textContent = "";
    }, 4000);
  }
}

function redraw(): void {
  if (!currentChart) return;
  const view: PieView = {
    chart: currentChart,
    points: currentPoints,
    marker,
    highlightSector,
  };
  renderPie(ctx, frame, view);
}

async function loadSlide(slideId: string): Promise<void> {
  try {
    if (slideId.startsWith(CLASS_AVG_PREFIX)) {
      await loadClassAverage(Number(slideId.slice(CLASS_AVG_PREFIX.length)));
      return;
    }
    const [chart, points, explain] = await Promise.all([
      api.chart(slideId),
      api.points(slideId),
      api.explain(slideId),
    ]);
    aggregateMode = false;
    currentChart = chart;
    currentPoints = points.points;
    currentExplain = explain;
    marker = null;
    renderGallery(galleryBox, api, []);
    renderRulePanel(rulesBox, buildRulePanelModel(explain));
    redraw();
  } catch (err) {
    toast(err instanceof ServiceError ? `${err.code}: ${err.message}` : String(err), true);
  }
}

// Fig-4-style class view: mean of the per-slide charts, display math only.
async function loadClassAverage(label: number): Promise<void> {
  const ids = slideIdsByLabel.get(label) ?? [];
  const charts = await Promise.all(ids.map((id) => api.chart(id)));
  aggregateMode = true;
  currentChart = averageCharts(charts, `class ${label} average (${ids.length} slides)`);
  currentPoints = [];
  currentExplain = null;
  marker = null;
  renderGallery(galleryBox, api, []);
  rulesBox.replaceChildren();
  const note = document.createElement("div");
  note.className = "gallery-empty";
  note.textContent =
    "class-average view: densities are the client-side mean of per-slide charts; " +
    "pick a single slide for predictions";
  rulesBox.appendChild(note);
  redraw();
}

async function boot(): Promise<void> {
  try {
    await api.health();
    const slides = await api.slides();
    slidePicker.replaceChildren();
    slideIdsByLabel = new Map();
    for (const slide of slides) {
      const opt = document.createElement("option");
      opt.value = slide.slide_id;
      opt.textContent = `${slide.slide_id} (${slide.cell_count} cells`
        + (slide.label !== null ? `, class ${slide.label}` : "")
        + (slide.synthetic ? ", synthetic" : "") + ")";
      slidePicker.appendChild(opt);
      if (slide.label !== null) {
        const bucket = slideIdsByLabel.get(slide.label) ?? [];
        bucket.push(slide.slide_id);
        slideIdsByLabel.set(slide.label, bucket);
      }
    }
    for (const label of [...slideIdsByLabel.keys()].sort()) {
      const opt = document.createElement("option");
      opt.value = `${CLASS_AVG_PREFIX}${label}`;
      opt.textContent = `class ${label} average (display math)`;
      slidePicker.appendChild(opt);
    }
    const first = slides[0];
    if (first) {
      slidePicker.value = first.slide_id;
      await loadSlide(first.slide_id);
    }
    toast(`connected: ${slides.length} slides`);
  } catch (err) {
    toast(`cannot reach service at ${api.baseUrl}: ${String(err)}`, true);
  }
}

canvas.addEventListener("click", async (ev) => {
  if (!currentChart) return;
  const rect = canvas.getBoundingClientRect();
  const px = ((ev.clientX - rect.left) / rect.width) * frame.size;
  const py = ((ev.clientY - rect.top) / rect.height) * frame.size;
  const clamped = clampToDisc(pixelToUnit(frame, px, py).x, pixelToUnit(frame, px, py).y);
  marker = clamped;
  redraw();
  try {
    const payload = await api.nearest({
      x: clamped.x,
      y: clamped.y,
      k: 8,
      slide_id: onlyThisSlide.checked && !aggregateMode ? currentChart.slide_id : null,
    });
    renderGallery(galleryBox, api, payload.cells);
  } catch (err) {
    toast(err instanceof ServiceError ? `${err.code}: ${err.message}` : String(err), true);
  }
});

canvas.addEventListener("mousemove", (ev) => {
  if (!currentChart) return;
  const rect = canvas.getBoundingClientRect();
  const px = ((ev.clientX - rect.left) / rect.width) * frame.size;
  const py = ((ev.clientY - rect.top) / rect.height) * frame.size;
  const sector = sectorAtPixel(frame, px, py);
  if (sector !== highlightSector) {
    highlightSector = sector;
    redraw();
  }
  hoverInfo.textContent =
    sector === null
      ? ""
      : `D${sector + 1} = ${formatDensity(currentChart.densities[sector] ?? 0)}`;
});

slidePicker.addEventListener("change", () => void loadSlide(slidePicker.value));
baseUrlInput.addEventListener("change", () => {
  api = new ApiClient(baseUrlInput.value || DEFAULT_BASE_URL);
  void boot();
});

baseUrlInput.value = DEFAULT_BASE_URL;
void boot();

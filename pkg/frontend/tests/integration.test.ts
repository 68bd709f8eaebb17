// End-to-end checks against a live service on planted-data artifacts:
// the click path must return galleries byte-identical to direct /nearest
// calls, and client-side sector math must reproduce the served charts.

import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { nearestRequestBody } from "../src/api.js";
import { Frame, angleOf, clampToDisc, pixelToUnit, sectorOf, unitToPixel } from "../src/geometry.js";
import type { ChartPayload, NearestQuery, PointsPayload, SlideInfo } from "../src/types.js";

const frame: Frame = { size: 520, margin: 16 };

let workDir: string;
let server: ChildProcess | null = null;
let baseUrl = "";

async function waitForHealth(url: string, attempts = 100): Promise<void> {
  for (let i = 0; i < attempts; i++) {
    try {
      const resp = await fetch(`${url}/health`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error(`service at ${url} never became healthy`);
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "ui-itest-"));
  const dataDir = join(workDir, "data");
  const artifactsDir = join(workDir, "artifacts");
  execFileSync("python3", [
    "-m", "cytorules.cli", "make-planted",
    "--out-dir", dataDir, "--seed", "33",
    "--slides-per-class", "4", "--cells-per-slide", "120",
  ]);
  execFileSync("python3", [
    "-m", "cytorules.cli", "build-artifacts",
    "--manifest", join(dataDir, "manifest.json"),
    "--out", artifactsDir, "--seed", "33", "--iterations", "600",
  ], { timeout: 120_000 });

  server = spawn("python3", [
    "-m", "cytorules.cli", "serve",
    "--artifacts", artifactsDir, "--bind", "127.0.0.1:0",
  ]);
  baseUrl = await new Promise<string>((resolve, reject) => {
    let buffer = "";
    const timer = setTimeout(() => reject(new Error(`serve never announced: ${buffer}`)), 30_000);
    server!.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/http:\/\/[\d.]+:\d+/);
      if (match) {
        clearTimeout(timer);
        resolve(match[0]);
      }
    });
    server!.on("exit", (code) => reject(new Error(`serve exited early (${code}): ${buffer}`)));
  });
  await waitForHealth(baseUrl);
}, 180_000);

afterAll(() => {
  server?.kill();
  if (workDir) rmSync(workDir, { recursive: true, force: true });
});

async function postNearestRaw(query: NearestQuery): Promise<string> {
  const resp = await fetch(`${baseUrl}/nearest`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(nearestRequestBody(query)),
  });
  expect(resp.status).toBe(200);
  return resp.text();
}

describe("click-to-query against the live service", () => {
  it("10 random in-disc clicks return galleries byte-identical to direct /nearest calls", async () => {
    let state = 987654321;
    const rand = () => {
      // deterministic LCG so reruns hit the same pixels
      state = (state * 1103515245 + 12345) % 2147483648;
      return state / 2147483648;
    };
    for (let i = 0; i < 10; i++) {
      const r = Math.sqrt(rand()) * 0.98;
      const theta = rand() * 2 * Math.PI;
      const pixel = unitToPixel(frame, r * Math.cos(theta), r * Math.sin(theta));
      // the UI click path: pixel -> unit coords -> clamp -> request body
      const unit = pixelToUnit(frame, pixel.px, pixel.py);
      const clamped = clampToDisc(unit.x, unit.y);
      const viaUi = await postNearestRaw({ x: clamped.x, y: clamped.y, k: 8 });
      const direct = await postNearestRaw({ x: clamped.x, y: clamped.y, k: 8 });
      expect(Buffer.from(viaUi).equals(Buffer.from(direct))).toBe(true);
      const cells = JSON.parse(viaUi).cells;
      expect(cells).toHaveLength(8);
      const dists = cells.map((c: { distance: number }) => c.distance);
      expect([...dists].sort((a, b) => a - b)).toEqual(dists);
    }
  }, 60_000);

  it("slide-filtered clicks only return that slide's cells", async () => {
    const slides = (await (await fetch(`${baseUrl}/slides`)).json()).slides as SlideInfo[];
    const target = slides[0]!.slide_id;
    const body = await postNearestRaw({ x: 0.1, y: 0.2, k: 5, slide_id: target });
    const cells = JSON.parse(body).cells as { slide_id: string }[];
    expect(cells.length).toBeGreaterThan(0);
    expect(cells.every((c) => c.slide_id === target)).toBe(true);
  });
});

describe("pie chart numerics against the live service", () => {
  it("client-side sector assignment reproduces every served density chart", async () => {
    const slides = (await (await fetch(`${baseUrl}/slides`)).json()).slides as SlideInfo[];
    expect(slides.length).toBe(8);
    for (const slide of slides) {
      const chart = (await (
        await fetch(`${baseUrl}/slides/${slide.slide_id}/chart`)
      ).json()) as ChartPayload;
      const points = (await (
        await fetch(`${baseUrl}/slides/${slide.slide_id}/points`)
      ).json()) as PointsPayload;

      const counts = new Array(12).fill(0);
      for (const p of points.points) {
        counts[p.x === 0 && p.y === 0 ? 0 : sectorOf(angleOf(p.x, p.y))] += 1;
      }
      const densities = counts.map((c) => c / points.points.length);
      expect(densities.reduce((a, b) => a + b, 0)).toBeCloseTo(1, 9);
      for (let k = 0; k < 12; k++) {
        expect(densities[k]).toBeCloseTo(chart.densities[k]!, 12);
      }
    }
  }, 60_000);
});

// Typed client for the slide-exploration service. One base-URL setting.

import type {
  ChartPayload,
  ExplainPayload,
  NearestPayload,
  NearestQuery,
  PointsPayload,
  RulesetPayload,
  SlideInfo,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
  ) {
    super(message);
  }
}

async function parseOrThrow<T>(resp: Response): Promise<T> {
  const body = await resp.text();
  if (!resp.ok) {
    try {
      const err = JSON.parse(body);
      throw new ServiceError(err.code ?? "error", err.message ?? body, resp.status);
    } catch (e) {
      if (e instanceof ServiceError) throw e;
      throw new ServiceError("error", body, resp.status);
    }
  }
  return JSON.parse(body) as T;
}

export class ApiClient {
  constructor(public baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async health(): Promise<{ status: string }> {
    return parseOrThrow(await fetch(this.url("/health")));
  }

  async slides(): Promise<SlideInfo[]> {
    const doc = await parseOrThrow<{ slides: SlideInfo[] }>(await fetch(this.url("/slides")));
    return doc.slides;
  }

  async chart(slideId: string): Promise<ChartPayload> {
    return parseOrThrow(await fetch(this.url(`/slides/${encodeURIComponent(slideId)}/chart`)));
  }

  async points(slideId: string): Promise<PointsPayload> {
    return parseOrThrow(await fetch(this.url(`/slides/${encodeURIComponent(slideId)}/points`)));
  }

  async explain(slideId: string): Promise<ExplainPayload> {
    return parseOrThrow(await fetch(this.url(`/slides/${encodeURIComponent(slideId)}/explain`)));
  }

  async ruleset(): Promise<RulesetPayload> {
    return parseOrThrow(await fetch(this.url("/ruleset")));
  }

  async nearest(query: NearestQuery): Promise<NearestPayload> {
    return parseOrThrow(
      await fetch(this.url("/nearest"), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(nearestRequestBody(query)),
      }),
    );
  }

  thumbnailUrl(cellId: string): string {
    return this.url(`/thumbnails/${encodeURIComponent(cellId)}`);
  }
}

/** Canonical request body for /nearest; shared by the click path and tests. */
export function nearestRequestBody(query: NearestQuery): Record<string, unknown> {
  const body: Record<string, unknown> = { x: query.x, y: query.y, k: query.k ?? 8 };
  if (query.slide_id) {
    body.slide_id = query.slide_id;
  }
  return body;
}

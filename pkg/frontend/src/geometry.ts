// Pixel <-> unit-circle transforms and the 12-sector convention.
//
// Unit frame: x right, y up, disc of radius 1 centered at the origin.
// Sector k (0-based) spans angles [k*pi/6, (k+1)*pi/6), counterclockwise
// from the positive x axis -- the same half-open convention the service
// uses to bin cells, so clicks and sector labels line up exactly.

export const SECTOR_COUNT = 12;
export const SECTOR_WIDTH = (2 * Math.PI) / SECTOR_COUNT;

export interface Frame {
  size: number; // square canvas side in pixels
  margin: number; // padding between disc rim and canvas edge
}

export function discRadius(frame: Frame): number {
  return frame.size / 2 - frame.margin;
}

export function unitToPixel(frame: Frame, x: number, y: number): { px: number; py: number } {
  const r = discRadius(frame);
  const c = frame.size / 2;
  return { px: c + x * r, py: c - y * r };
}

export function pixelToUnit(frame: Frame, px: number, py: number): { x: number; y: number } {
  const r = discRadius(frame);
  const c = frame.size / 2;
  return { x: (px - c) / r, y: (c - py) / r };
}

export function clampToDisc(x: number, y: number): { x: number; y: number } {
  const norm = Math.hypot(x, y);
  if (norm <= 1 || norm === 0) {
    return { x, y };
  }
  return { x: x / norm, y: y / norm };
}

/** Angle in [0, 2*pi) of a unit-frame point; (0, 0) maps to 0. */
export function angleOf(x: number, y: number): number {
  const theta = Math.atan2(y, x);
  return theta < 0 ? theta + 2 * Math.PI : theta;
}

/** 0-based sector index of an angle, matching the service's binning. */
export function sectorOf(theta: number): number {
  const wrapped = ((theta % (2 * Math.PI)) + 2 * Math.PI) % (2 * Math.PI);
  return Math.min(Math.floor(wrapped / SECTOR_WIDTH), SECTOR_COUNT - 1);
}

export function sectorSpan(sector: number): { start: number; end: number } {
  return { start: sector * SECTOR_WIDTH, end: (sector + 1) * SECTOR_WIDTH };
}

/** Sector under a pixel, or null outside the disc. */
export function sectorAtPixel(frame: Frame, px: number, py: number): number | null {
  const { x, y } = pixelToUnit(frame, px, py);
  if (Math.hypot(x, y) > 1) {
    return null;
  }
  return sectorOf(angleOf(x, y));
}

export function formatDensity(d: number): string {
  return d.toFixed(3);
}

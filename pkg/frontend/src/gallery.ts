// Nearest-cell gallery: thumbnails when the service has them, otherwise a
// deterministic color glyph derived from the cell id.

import type { ApiClient } from "./api.js";
import type { NearestCell } from "./types.js";

function glyphColor(cellId: string): string {
  let hash = 2166136261;
  for (let i = 0; i < cellId.length; i++) {
    hash = (hash ^ cellId.charCodeAt(i)) >>> 0;
    hash = (hash * 16777619) >>> 0;
  }
  const hue = hash % 360;
  return `hsl(${hue}, 55%, 62%)`;
}

export function renderGallery(container: HTMLElement, api: ApiClient, cells: NearestCell[]): void {
  container.replaceChildren();
  if (cells.length === 0) {
    const empty = document.createElement("div");
    empty.className = "gallery-empty";
    empty.textContent = "click inside the disc to retrieve cells";
    container.appendChild(empty);
    return;
  }
  for (const cell of cells) {
    const card = document.createElement("figure");
    card.className = "cell-card";

    const glyph = document.createElement("div");
    glyph.className = "cell-glyph";
    glyph.style.background = glyphColor(cell.cell_id);
    glyph.title = cell.cell_id;
    card.appendChild(glyph);

    if (cell.thumbnail_ref) {
      const img = document.createElement("img");
      img.className = "cell-thumb";
      img.alt = cell.cell_id;
      img.src = api.thumbnailUrl(cell.cell_id);
      img.onload = () => glyph.replaceWith(img);
    }

    const caption = document.createElement("figcaption");
    caption.innerHTML = `<b>${cell.cell_id}</b><br>${cell.slide_id}<br>d = ${cell.distance.toFixed(3)}`;
    card.appendChild(caption);
    container.appendChild(card);
  }
}

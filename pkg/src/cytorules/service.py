"""Read-only HTTP facade over a fitted pipeline for the exploration UI.

A session is loaded once from serialized artifacts (dataset manifest,
embedding+distortion document, rule set); every endpoint is a pure function
of that immutable state, so concurrent identical requests return identical
bodies. Retrieval operates in the distorted unit-circle coordinates that
the charts are drawn in, so UI clicks map directly to queries.
"""

from __future__ import annotations

import json
import mimetypes
import re
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import brs, chart, embed
from .dataset import Dataset, load_dataset
from .errors import ArtifactLoadError, BindFailure, UnknownSlide


@dataclass
class NearestCellsQuery:
    x: float
    y: float
    k: int = 8
    slide_id: str | None = None


@dataclass
class SessionState:
    dataset: Dataset
    model: embed.EmbeddingModel
    distortion: chart.DistortionParams
    ruleset: brs.RuleSet
    charts: dict[str, chart.DensityChart]
    vectors: dict[str, np.ndarray]
    coords: dict[str, np.ndarray]  # per-slide distorted cartesian coords
    artifacts_dir: Path | None = None

    # flattened retrieval index, built once at load
    all_xy: np.ndarray | None = None
    all_cell_ids: np.ndarray | None = None
    all_slide_ids: np.ndarray | None = None


def build_session(
    dataset: Dataset,
    model: embed.EmbeddingModel,
    distortion: chart.DistortionParams,
    ruleset: brs.RuleSet,
    artifacts_dir: Path | None = None,
) -> SessionState:
    """Compute per-slide charts and the retrieval index deterministically."""
    charts, vectors, coords = {}, {}, {}
    xy_blocks, cell_ids, slide_ids = [], [], []
    for slide in dataset.slides:
        placed = embed.transform_points(model, slide.feature_matrix())
        polar = chart.distort(distortion, placed)
        xy = chart.polar_to_cartesian(polar)
        coords[slide.slide_id] = xy
        charts[slide.slide_id] = chart.density_chart(polar, slide.slide_id)
        vectors[slide.slide_id] = chart.feature_vector(charts[slide.slide_id])
        xy_blocks.append(xy)
        cell_ids.extend(c.cell_id for c in slide.cells)
        slide_ids.extend([slide.slide_id] * len(slide.cells))
    return SessionState(
        dataset=dataset,
        model=model,
        distortion=distortion,
        ruleset=ruleset,
        charts=charts,
        vectors=vectors,
        coords=coords,
        artifacts_dir=artifacts_dir,
        all_xy=np.vstack(xy_blocks),
        all_cell_ids=np.asarray(cell_ids),
        all_slide_ids=np.asarray(slide_ids),
    )


def load_session(artifacts_dir: str | Path) -> SessionState:
    """Load dataset + embedding/distortion + rule set from a directory."""
    artifacts_dir = Path(artifacts_dir)
    try:
        dataset = load_dataset(artifacts_dir / "manifest.json")
        model, distortion = embed.load_model(artifacts_dir / "embedding.json")
        if distortion is None:
            raise ArtifactLoadError("embedding.json carries no distortion params")
        with open(artifacts_dir / "ruleset.json", encoding="utf-8") as fh:
            ruleset = brs.RuleSet.from_json(json.load(fh))
    except ArtifactLoadError:
        raise
    except Exception as exc:
        raise ArtifactLoadError(f"cannot load artifacts from {artifacts_dir}: {exc}") from exc
    return build_session(dataset, model, distortion, ruleset, artifacts_dir)


def clamp_to_disc(x: float, y: float) -> tuple[float, float]:
    norm = float(np.hypot(x, y))
    if norm <= 1.0 or norm == 0.0:
        return float(x), float(y)
    return float(x / norm), float(y / norm)


def nearest_cells(state: SessionState, query: NearestCellsQuery):
    """k nearest cells to the query point in distorted coordinates.

    Ties break by cell_id then slide_id lexicographic order; matches a
    brute-force scan by construction.
    """
    qx, qy = clamp_to_disc(query.x, query.y)
    mask = None
    if query.slide_id is not None:
        if query.slide_id not in state.charts:
            raise UnknownSlide(query.slide_id)
        mask = state.all_slide_ids == query.slide_id
    xy = state.all_xy if mask is None else state.all_xy[mask]
    cell_ids = state.all_cell_ids if mask is None else state.all_cell_ids[mask]
    slide_ids = state.all_slide_ids if mask is None else state.all_slide_ids[mask]
    dists = np.hypot(xy[:, 0] - qx, xy[:, 1] - qy)
    order = np.lexsort((slide_ids, cell_ids, dists))[: max(query.k, 0)]
    out = []
    for idx in order:
        slide = state.dataset.get_slide(str(slide_ids[idx]))
        cell = next(c for c in slide.cells if c.cell_id == str(cell_ids[idx]))
        out.append(
            {
                "cell_id": str(cell_ids[idx]),
                "slide_id": str(slide_ids[idx]),
                "distance": float(dists[idx]),
                "x": float(xy[idx, 0]),
                "y": float(xy[idx, 1]),
                "thumbnail_ref": cell.thumbnail_ref,
            }
        )
    return out


def explain_slide(state: SessionState, slide_id: str) -> dict:
    """Chart, 78-vector, prediction, fired rules and per-condition slacks."""
    if slide_id not in state.charts:
        raise UnknownSlide(slide_id)
    vector = state.vectors[slide_id]
    label, fired, detail = brs.predict(state.ruleset, vector)
    return {
        "slide_id": slide_id,
        "chart": state.charts[slide_id].to_json(),
        "features": vector.tolist(),
        "predicted_class": label.value,
        "positive_class": state.ruleset.positive_class.value,
        "fired_rules": [i + 1 for i in fired],  # 1-based for display
        "rules": [
            {"rule_number": i + 1, "text": rule.render(), "conditions": detail[i]}
            for i, rule in enumerate(state.ruleset.rules)
        ],
    }


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

_SLIDE_ROUTE = re.compile(r"^/slides/([^/]+)/(chart|points|explain)$")
_THUMB_ROUTE = re.compile(r"^/thumbnails/([^/]+)$")


class _Handler(BaseHTTPRequestHandler):
    state: SessionState  # set on the server class

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send_json(self, payload, status=200):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self._cors()
        self.end_headers()
        self.wfile.write(body)

    def _cors(self):
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _error(self, status, code, message):
        self._send_json({"code": code, "message": message}, status=status)

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.end_headers()

    def do_GET(self):
        state = self.server.state
        path = self.path.split("?", 1)[0]
        if path == "/health":
            return self._send_json({"status": "ok"})
        if path == "/slides":
            return self._send_json(
                {
                    "slides": [
                        {
                            "slide_id": s.slide_id,
                            "patient_id": s.patient_id,
                            "label": s.label.value if s.label else None,
                            "cell_count": len(s.cells),
                            "synthetic": s.synthetic,
                        }
                        for s in state.dataset.slides
                    ]
                }
            )
        if path == "/ruleset":
            return self._send_json(state.ruleset.to_json())
        m = _SLIDE_ROUTE.match(path)
        if m:
            slide_id, what = m.group(1), m.group(2)
            if slide_id not in state.charts:
                return self._error(404, "unknown_slide", f"no slide {slide_id!r}")
            if what == "chart":
                return self._send_json(state.charts[slide_id].to_json())
            if what == "points":
                xy = state.coords[slide_id]
                cells = state.dataset.get_slide(slide_id).cells
                return self._send_json(
                    {
                        "slide_id": slide_id,
                        "points": [
                            {"cell_id": c.cell_id, "x": float(p[0]), "y": float(p[1])}
                            for c, p in zip(cells, xy)
                        ],
                    }
                )
            return self._send_json(explain_slide(state, slide_id))
        m = _THUMB_ROUTE.match(path)
        if m:
            return self._send_thumbnail(m.group(1))
        return self._error(404, "not_found", f"no route {path!r}")

    def _send_thumbnail(self, cell_id):
        state = self.server.state
        hits = np.nonzero(state.all_cell_ids == cell_id)[0]
        if hits.size == 0:
            return self._error(404, "unknown_cell", f"no cell {cell_id!r}")
        slide = state.dataset.get_slide(str(state.all_slide_ids[hits[0]]))
        cell = next(c for c in slide.cells if c.cell_id == cell_id)
        if not cell.thumbnail_ref or state.artifacts_dir is None:
            return self._error(404, "no_thumbnail", f"cell {cell_id!r} has no thumbnail")
        path = (state.artifacts_dir / cell.thumbnail_ref).resolve()
        if state.artifacts_dir.resolve() not in path.parents or not path.is_file():
            return self._error(404, "no_thumbnail", f"thumbnail for {cell_id!r} not found")
        data = path.read_bytes()
        ctype = mimetypes.guess_type(str(path))[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self._cors()
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        state = self.server.state
        path = self.path.split("?", 1)[0]
        if path != "/nearest":
            return self._error(404, "not_found", f"no route {path!r}")
        try:
            length = int(self.headers.get("Content-Length", "0"))
            doc = json.loads(self.rfile.read(length).decode("utf-8"))
            query = NearestCellsQuery(
                x=float(doc["x"]),
                y=float(doc["y"]),
                k=int(doc.get("k", 8)),
                slide_id=doc.get("slide_id"),
            )
        except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
            return self._error(400, "bad_request", f"malformed query: {exc}")
        try:
            cells = nearest_cells(state, query)
        except UnknownSlide as exc:
            return self._error(404, "unknown_slide", str(exc))
        qx, qy = clamp_to_disc(query.x, query.y)
        return self._send_json({"query": {"x": qx, "y": qy, "k": query.k}, "cells": cells})


class PipelineServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, state: SessionState):
        self.state = state
        super().__init__(address, _Handler)


def serve(state: SessionState, bind_address: str = "127.0.0.1:8750") -> PipelineServer:
    """Start the facade in a background thread; caller owns shutdown()."""
    host, _, port = bind_address.rpartition(":")
    try:
        server = PipelineServer((host or "127.0.0.1", int(port)), state)
    except OSError as exc:
        raise BindFailure(f"cannot bind {bind_address}: {exc}") from exc
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    server.thread = thread
    return server

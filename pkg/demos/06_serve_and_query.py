"""Build servable artifacts and query the HTTP facade.

Fits a deployable pipeline on planted data, serves it on an ephemeral
port, and exercises every endpoint the browser UI consumes: slide listing,
charts, explanations with fired rules, and click-to-nearest retrieval.
"""

import json
import tempfile
import urllib.request
from pathlib import Path

from cytorules.artifacts import build_artifacts
from cytorules.brs import SaSchedule
from cytorules.dataset import PlantedSpec, generate_planted_dataset
from cytorules.embed import EmbeddingConfig
from cytorules.service import load_session, serve


def get(base, path):
    with urllib.request.urlopen(base + path) as resp:
        return json.loads(resp.read())


def post(base, path, body):
    req = urllib.request.Request(
        base + path, data=json.dumps(body).encode(), headers={"Content-Type": "application/json"}
    )
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


with tempfile.TemporaryDirectory() as tmp:
    dataset = generate_planted_dataset(
        PlantedSpec.two_component(slides_per_class=4, cells_per_slide=150), seed=5
    )
    out = build_artifacts(
        dataset,
        Path(tmp) / "artifacts",
        embedding_cfg=EmbeddingConfig(n_neighbors=10, n_epochs=80, seed=5),
        schedule=SaSchedule(iterations=1200, seed=5),
    )
    server = serve(load_session(out), "127.0.0.1:0")
    host, port = server.server_address[:2]
    base = f"http://{host}:{port}"
    print(f"serving at {base}")

    print("\nhealth:", get(base, "/health"))
    slides = get(base, "/slides")["slides"]
    print(f"slides: {len(slides)} (first: {slides[0]['slide_id']}, label {slides[0]['label']})")

    sid = slides[0]["slide_id"]
    chart = get(base, f"/slides/{sid}/chart")
    print(f"chart densities sum: {sum(chart['densities']):.6f}")

    explain = get(base, f"/slides/{sid}/explain")
    print(f"predicted class {explain['predicted_class']}, fired rules {explain['fired_rules']}")

    rules = get(base, "/ruleset")
    print("rule set:\n  " + rules["text"].replace("\n", "\n  "))

    nearest = post(base, "/nearest", {"x": 0.3, "y": -0.2, "k": 3})
    for cell in nearest["cells"]:
        print(f"  nearest: {cell['cell_id']} (slide {cell['slide_id']}) at d={cell['distance']:.3f}")

    server.shutdown()
    print("server stopped")

#!/usr/bin/env python3
"""Runs the CLI on a small simulated orchard and validates every artifact
against the JSON schemas in schemas/."""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema


def main():
    cli, schemas = sys.argv[1], pathlib.Path(sys.argv[2])
    load = lambda name: json.loads((schemas / name).read_text())
    failures = []

    def check(schema_name, doc, what):
        try:
            jsonschema.validate(doc, load(schema_name))
        except jsonschema.ValidationError as e:
            failures.append(f"{what}: {e.message}")

    def run(*args):
        subprocess.run([cli, *map(str, args)], check=True, capture_output=True)

    with tempfile.TemporaryDirectory() as tmp:
        d = pathlib.Path(tmp)
        run("simulate", "--seed", 3, "--trees", 1, "--fruits-per-tree", 20, "--out", d / "sim")
        manifest = d / "sim" / "sim-front.manifest.json"
        frames = [f["id"] for f in json.loads(manifest.read_text())["frames"]]

        # The labelling only has to produce a valid model, not a good one.
        clicks = []
        for fid in frames[:2]:
            for y in range(4, 288, 24):
                for x in range(4, 384, 24):
                    clicks.append({"frame": fid, "x": x, "y": y, "label": "apple" if (x + y) % 48 == 8 else "background"})
        (d / "clicks.json").write_text(json.dumps(clicks))
        check("clicks.schema.json", clicks, "clicks")

        run("train-color-model", "--manifest", manifest, "--clicks", d / "clicks.json", "--frames", ",".join(frames[:2]),
            "--slic-target", 600, "--components", 12, "--out", d / "model.json")
        run("detect", "--manifest", manifest, "--model", d / "model.json", "--out", d / "det.jsonl")
        run("count", "--scene", d / "sim" / "scene.json", "--model", d / "model.json", "--manifest", manifest,
            "--manifest", d / "sim" / "sim-back.manifest.json", "--out", d / "counted.json", "--pairs", d / "pairs.csv")
        run("yield", "--scene", d / "counted.json", "--out", d / "report")
        run("evaluate", "--detections", d / "det.jsonl", "--annotations", d / "sim" / "sim-front.boxes.json",
            "--count-pairs", d / "pairs.csv", "--out-dir", d / "eval")
        (d / "ext.jsonl").write_text('{"cluster_id": "t0", "count": 2, "side": "front"}\n')

        for name in ["sim-front.manifest.json", "sim-back.manifest.json"]:
            check("manifest.schema.json", json.loads((d / "sim" / name).read_text()), name)
        for name in ["sim-front.boxes.json", "sim-back.boxes.json"]:
            check("boxes.schema.json", json.loads((d / "sim" / name).read_text()), name)
        model = json.loads((d / "model.json").read_text())
        check("color-model.schema.json", model, "model.json")
        check("detect-config.schema.json", model["config"], "model config")
        lines = [l for l in (d / "det.jsonl").read_text().splitlines() if l.strip()]
        for i, line in enumerate(lines):
            check("detection.schema.json", json.loads(line), f"det.jsonl:{i + 1}")
        check("scene.schema.json", json.loads((d / "sim" / "scene.json").read_text()), "scene.json")
        check("scene.schema.json", json.loads((d / "counted.json").read_text()), "counted.json")
        check("report.schema.json", json.loads((d / "report.json").read_text()), "report.json")
        check("metrics.schema.json", json.loads((d / "eval" / "metrics.json").read_text()), "metrics.json")
        check("confusion.schema.json", json.loads((d / "eval" / "confusion.json").read_text()), "confusion.json")
        check("external-counts.schema.json", json.loads((d / "ext.jsonl").read_text()), "ext.jsonl")
        if not lines:
            failures.append("det.jsonl: no detections to validate")

    for f in failures:
        print("FAIL", f)
    print(f"{'PASS' if not failures else 'FAIL'}: schema check")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())

"""Run the config-driven pipeline on a synthetic nine-asset return panel.

Writes everything into a temporary directory and lists the artifacts.
"""
import json
import tempfile
from pathlib import Path

from spegarch import MODEL_B, Panel, simulate
from spegarch.cli import pipeline_run
from spegarch.io import write_panel_csv
from spegarch.mc import lattice_weights

work = Path(tempfile.mkdtemp())
w1, w2 = lattice_weights(3, 3)
y = simulate(MODEL_B, w1, w2, 150, seed=12).y.values * 0.01
write_panel_csv(Panel(y, names=tuple(f"asset{i}" for i in range(9))), work / "returns.csv")

cfg = {
    "returns": "returns.csv",
    "seed": 5,
    "networks": [
        {"name": "euclid", "distance": "euclidean", "k": 3},
        {"name": "corr", "distance": "correlation", "k": 3},
        {"name": "piccolo", "distance": "piccolo", "k": 3, "ar_order": 1},
    ],
    "fit_options": {"n_starts": 10},
}
(work / "config.json").write_text(json.dumps(cfg, indent=2))

out = pipeline_run(work / "config.json")
print("outputs in", out)
for f in sorted(out.iterdir()):
    print("  ", f.name)
print((out / "comparison.csv").read_text())

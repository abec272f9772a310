#!/usr/bin/env python3
"""Run the standard experiments and render every figure kind.

Writes CSV artifacts under out/ and, when the plotkit frontend has been
built (cd plotkit && npm install && npm run build), SVG figures next to
them.  Every run is seeded, so the artifacts are reproducible bit for
bit.
"""

import pathlib
import shutil
import subprocess
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
CONFIG = ROOT / "configs" / "demo.yaml"
OUT = ROOT / "out"

RUNS = [
    ("force-scan", ["--set", "force-scan.r_points=200"], "force_scan.csv",
     "force-deviation"),
    ("two-mass-rate", [], "rate_curve.csv", "rate-curve"),
    ("two-sphere-rate", ["--set", "two-sphere-rate.samples=20000"],
     "rate_curve.csv", "rate-curve"),
    ("trajectories", ["--set", "trajectories.n_traj=500"], "heating.csv",
     "heating"),
    ("sphere-potential", [], "potential_profile.csv", "potential-profile"),
    ("r-surface", [], "r_surface.csv", "R-surface"),
]


def main() -> int:
    plotkit = ROOT / "plotkit" / "dist" / "cli.js"
    have_plotkit = plotkit.exists() and shutil.which("node")
    for name, extra, artifact, kind in RUNS:
        outdir = OUT / name
        cmd = [sys.executable, "-m", "ccgsim.cli", "--config", str(CONFIG),
               "--experiment", name, "--out", str(outdir)] + extra
        print("+", " ".join(cmd))
        subprocess.run(cmd, check=True)
        if have_plotkit:
            svg = outdir / (kind.lower().replace("-", "_") + ".svg")
            subprocess.run(["node", str(plotkit), kind,
                            str(outdir / artifact), "-o", str(svg)], check=True)
            print("  figure:", svg)
        else:
            print("  (plotkit not built; skipping the figure)")
    return 0


if __name__ == "__main__":
    sys.exit(main())

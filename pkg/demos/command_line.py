"""
Driving the engines from the command line
=========================================

``krflow`` exposes the same runs as the library.  Outputs land in
``--out`` (or $KRFLOW_OUT); the exit code is 2 when a flow meets a
singularity, with the partial trajectory still written.
"""
import json
import tempfile
from pathlib import Path

from krflow.cli import main

out = Path(tempfile.mkdtemp())

print("classify exit", main(["classify", "--geometry", "blowup_p2", "--class", "4,-2", "--out", str(out)]))
print(json.loads((out / "classify.json").read_text())["kind"])

print("mmp exit", main(["mmp", "--geometry", "two_point_blowup_p2", "--class", "4,-1,-1", "--out", str(out)]))

code = main(["scenario", "linear_degeneration", "--out", str(out)])
print("linear degeneration exit", code)
csv_lines = (out / "linear_degeneration" / "trajectory.csv").read_text().splitlines()
print(csv_lines[0])
print(csv_lines[-1][:120], "...")

print("bad override exit", main(["scenario", "torus_c1_zero", "--override", "N=4"]))

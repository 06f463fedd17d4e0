"""Drive the ardlab CLI end to end on the committed two-moons config.

Each subcommand reads configs/two_moons.cfg, writes into runs/demo/, and is
byte-deterministic: run this twice and diff the outputs.
"""
import sys
from pathlib import Path

from ardlab.cli import main

CONFIG = "configs/two_moons.cfg"
OUT = "runs/demo"

for cmd in ("train-teachers", "distill", "ablate", "verify-bound",
            "saliency", "evaluate"):
    print(f"\n$ ardlab {cmd} --config {CONFIG} --out {OUT}")
    code = main([cmd, "--config", CONFIG, "--out", OUT])
    if code != 0:
        print(f"failed with exit code {code}")
        sys.exit(code)

print("\nproducts in runs/demo/:")
for path in sorted(Path(OUT).iterdir()):
    print(f"  {path.name:32s} {path.stat().st_size:8d} bytes")

print("\nmetrics head:")
print("\n".join((Path(OUT) / "distill.csv").read_text().splitlines()[:4]))

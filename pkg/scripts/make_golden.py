"""Regenerate the frozen fixture inputs and pipeline outputs under tests/golden/.

Run only after an intentional change to numerical behaviour; the golden test
compares fresh runs against these files byte for byte.

    python3 scripts/make_golden.py [--seed 42]
"""

import argparse
import shutil
import tempfile
from pathlib import Path

from countyrisk.cli import write_fixture
from countyrisk.pipeline import load_config, run_pipeline

ROOT = Path(__file__).resolve().parents[1] / "tests" / "golden"
# absolute paths and library versions make the manifest host-specific
SKIP = {"manifest.json"}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        paths = write_fixture(tmp, args.seed)
        res = run_pipeline(load_config(paths["config"]))
        for sub in ("inputs", "outputs"):
            shutil.rmtree(ROOT / sub, ignore_errors=True)
            (ROOT / sub).mkdir(parents=True)
        for path in sorted(Path(tmp).iterdir()):
            if path.is_file():
                shutil.copy(path, ROOT / "inputs" / path.name)
        for name in sorted(res.outputs.values()):
            if name not in SKIP:
                shutil.copy(res.output_dir / name, ROOT / "outputs" / name)
    print(f"golden files written to {ROOT}")


if __name__ == "__main__":
    main()

"""Write the synthetic fixture for a seed and run the whole pipeline on it.

    python3 scripts/run_fixture.py --seed 42 --out-dir /tmp/countyrisk-fixture
"""

import argparse
import json
from pathlib import Path

from countyrisk.cli import write_fixture
from countyrisk.pipeline import load_config, run_pipeline


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out-dir", default="fixture-run")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    paths = write_fixture(args.out_dir, args.seed)
    cfg = load_config(paths["config"])
    cfg.workers = args.workers
    res = run_pipeline(cfg)
    report = json.loads((res.output_dir / "report.json").read_text())
    truth = json.loads(Path(paths["truth"]).read_text())
    print(f"outputs in {res.output_dir}")
    print(f"selected response: {report['selected_response']}  Moran I (smoothed) {report['moran_i']:.3f} "
          f"p {report['moran_p']:.3f}")
    print(f"Bayes p {report['bayes_p']:.3f}  DIC {report['dic']:.2f}  n {report['n']}")
    print(f"generating CAR phi {truth['car_phi']}  bounds {truth['car_phi_bounds']}")
    for row in report["coefficients"]:
        print(f"  {row['variable']:>20} {row['posterior_mean']:+.3f}  [{row['lower_95']:+.3f}, {row['upper_95']:+.3f}]")
    for w in res.warnings:
        print(f"warning: {w}")


if __name__ == "__main__":
    main()

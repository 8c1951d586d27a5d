"""Default volume sweep: writes the CSV, the report JSON and prints the fitted slopes."""

import argparse
from pathlib import Path

from corner_nucleation import scaling


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--config", help="key = value sweep config")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    cfg = scaling.load_config(args.config) if args.config else scaling.SweepConfig()
    csv_path = args.out / "sweep.csv"
    csv_path.write_text(scaling.sweep_csv_text(scaling.sweep(cfg)))
    doc, ok = scaling.report(csv_path)
    (args.out / "report.json").write_text(scaling.dumps(doc))

    for name, fit in sorted(doc["fits"].items()):
        lo, hi = fit["bounds"]
        print(f"{name:20s} slope {fit['slope']:.4f}  target [{lo:.4f}, {hi:.4f}]  r2 {fit['r2']:.5f}")
    print(f"total/V^(7/9) spread {doc['total_ratio']['spread']:.3f}")
    print("all checks passed" if ok else "some checks failed: "
          + ", ".join(k for k, v in doc["checks"].items() if not v))


if __name__ == "__main__":
    main()

"""Sweep the CoV temperature on the demo corpus and print the comparison table."""

import argparse
from dataclasses import replace
from pathlib import Path

from evidence_align import cli, pipeline


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_sweep")
    ap.add_argument("--grid", type=float, nargs="+")
    args = ap.parse_args()

    out = Path(args.out)
    cli.main(["make-demo", "--out", str(out)])
    cfg = pipeline.PipelineConfig.load(out / "config.yaml")
    if args.grid:
        cfg = replace(cfg, tau_grid=tuple(args.grid))
    rows = pipeline.sweep_tau(cfg)
    print(f"{'tau':>5s} {'mrr':>7s} {'top1':>6s} {'pairs':>6s} {'final loss':>11s}")
    for r in rows:
        if r["error"]:
            print(f"{r['tau']:5g} error: {r['error']}")
        else:
            print(f"{r['tau']:5g} {r['mrr']:7.4f} {r['top1']:6.3f} {r['n_pairs']:6d} {r['final_loss']:11.6f}")
    print(f"\ntable written to {Path(cfg.out_dir) / 'sweep.tsv'}")


if __name__ == "__main__":
    main()

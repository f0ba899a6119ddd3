"""Write the synthetic demo corpus, run the whole pipeline on it and summarise the outputs."""

import argparse
import json
from pathlib import Path

from evidence_align import cli, pipeline, stages


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_run")
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--no-lambda", action="store_true")
    ap.add_argument("--uniform-weights", action="store_true")
    ap.add_argument("--no-dedup", action="store_true")
    args = ap.parse_args()

    out = Path(args.out)
    cli.main(["make-demo", "--out", str(out), "--seed", str(args.seed)])
    argv = ["run", "--config", str(out / "config.yaml")]
    argv += [f"--{k.replace('_', '-')}" for k in ("no_lambda", "uniform_weights", "no_dedup")
             if getattr(args, k)]
    code = cli.main(argv)
    if code:
        raise SystemExit(code)

    run = out / "run"
    report = json.loads((run / "report.json").read_text())
    n_pairs = sum(1 for _ in (run / "pairs.jsonl").open())
    n_cands = sum(len(json.loads(l)["candidates"]) for l in (run / "candidates.jsonl").open())
    print(f"\ncandidates after dedup: {n_cands}")
    print(f"preference pairs:       {n_pairs}")
    print(f"toy policy:             mrr={report['mrr']:.4f} top1={report['top1']:.3f} "
          f"loss {report['initial_loss']:.5f} -> {report['final_loss']:.5f}")
    summary = stages.run_eval(pipeline.PipelineConfig.load(out / "config.yaml").responses,
                                       out / "records.jsonl", run / "eval.jsonl")
    print(f"generator responses:    EM={summary['em']:.3f} F1={summary['f1']:.3f} Tok={summary['tok']:.1f}")


if __name__ == "__main__":
    main()

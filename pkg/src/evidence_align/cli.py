"""Command-line entry point: ``evidence-align <subcommand>``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import yaml

from . import alignment, pipeline, stages, synthetic
from .dedup import DedupConfig

log = logging.getLogger("evidence_align")


def _add_io(p, *names):
    for name in names:
        p.add_argument(f"--{name}", required=True, dest=name.replace("-", "_"))


def _cmd_dedup(a):
    sets = stages.run_dedup(a.in_, a.out, DedupConfig(n=a.n, threshold=a.threshold), a.no_dedup)
    print(f"{len(sets)} queries, {sum(len(s.candidates) for s in sets)} candidates kept")


def _cmd_assess(a):
    spec = {}
    if a.config:
        spec = (yaml.safe_load(Path(a.config).read_text()) or {}).get("experts", {})
    rows = stages.run_assess(a.records, a.in_, a.out, pipeline.build_backends(spec), a.workers)
    print(f"scored {sum(len(r['candidates']) for r in rows)} candidates")


def _cmd_weight(a):
    rows = stages.run_weight(a.in_, a.out, a.tau, a.uniform_weights, a.dataset_level_cov)
    print(f"weighted {len(rows)} queries")


def _cmd_pairs(a):
    pairs = stages.run_pairs(a.in_, a.out, use_lambda=not a.no_lambda)
    print(f"{len(pairs)} preference pairs")


def _cmd_train(a):
    cfg = alignment.LossConfig(beta=a.beta, form=a.form, lambda_mode=a.lambda_mode)
    rep = stages.run_train(a.pairs, a.report, a.epochs, a.lr, cfg, a.seed, a.pairs_per_context)
    print(f"mrr={rep['mrr']:.4f} top1={rep['top1']:.4f} "
          f"loss {rep['initial_loss']:.6f} -> {rep['final_loss']:.6f}")


def _cmd_gradcheck(a):
    worst = alignment.gradcheck(a.trials, seed=a.seed)
    ok = True
    for form, err in worst.items():
        passed = err < a.tol
        ok &= passed
        print(f"{form:14s} max relative error {err:.3e}  {'PASS' if passed else 'FAIL'}")
    return 0 if ok else 1


def _cmd_eval(a):
    summary = stages.run_eval(a.responses, a.records, a.out, a.max_answer_tokens)
    print(json.dumps(summary))


def _cmd_perturb(a):
    mixes = stages.run_perturb(a.records, a.pool, a.out, a.nsr, a.seed)
    print(f"{len(mixes)} noisy records at NSR {a.nsr}%")


def _cmd_export(a):
    rows = stages.run_export_ppo(a.in_, a.out)
    print(f"{len(rows)} reward records")


def _config(a) -> pipeline.PipelineConfig:
    cfg = pipeline.PipelineConfig.load(a.config)
    flags = {k: True for k in ("no_dedup", "uniform_weights", "no_lambda", "dataset_level_cov")
             if getattr(a, k, False)}
    if flags:
        cfg = dataclasses.replace(cfg, ablations=dataclasses.replace(cfg.ablations, **flags))
    if getattr(a, "grid", None):
        cfg = dataclasses.replace(cfg, tau_grid=tuple(a.grid))
    return cfg


def _cmd_run(a):
    manifest = pipeline.run(_config(a))
    for name, st in manifest["stages"].items():
        print(f"{name:10s} {st['status']}")


def _cmd_sweep(a):
    rows = pipeline.sweep_tau(_config(a))
    for r in rows:
        if r["error"]:
            print(f"tau={r['tau']:<5g} ERROR {r['error']}")
        else:
            print(f"tau={r['tau']:<5g} mrr={r['mrr']:.4f} top1={r['top1']:.4f} pairs={r['n_pairs']}")
    return 0 if all(r["error"] is None for r in rows) else 1


def _cmd_demo(a):
    paths = synthetic.write_demo(a.out, a.seed)
    config = {
        "records": paths["records"].name, "samples": paths["samples"].name,
        "responses": paths["responses"].name, "out_dir": "run",
        "dedup": {"n": 2, "threshold": 0.8}, "tau": 1.0, "beta": 0.1,
        "epochs": 200, "lr": 0.5, "seed": 7,
    }
    cfg_path = Path(a.out) / "config.yaml"
    cfg_path.write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")
    print(f"demo data and config written to {a.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evidence-align", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dedup", help="remove near-duplicate samples")
    p.add_argument("--in", dest="in_", required=True)
    _add_io(p, "out")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--threshold", type=float, default=0.8)
    p.add_argument("--no-dedup", action="store_true")
    p.set_defaults(func=_cmd_dedup)

    p = sub.add_parser("assess", help="score candidates with the three experts")
    _add_io(p, "records")
    p.add_argument("--in", dest="in_", required=True)
    _add_io(p, "out")
    p.add_argument("--config", help="YAML/JSON file with an 'experts' section")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_assess)

    p = sub.add_parser("weight", help="combine expert scores by CoV-weighting and rank")
    p.add_argument("--in", dest="in_", required=True)
    _add_io(p, "out")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--uniform-weights", action="store_true")
    p.add_argument("--dataset-level-cov", action="store_true")
    p.set_defaults(func=_cmd_weight)

    p = sub.add_parser("pairs", help="build lambda-weighted preference pairs")
    p.add_argument("--in", dest="in_", required=True)
    _add_io(p, "out")
    p.add_argument("--no-lambda", action="store_true")
    p.set_defaults(func=_cmd_pairs)

    p = sub.add_parser("train-toy", help="train the tabular toy policy on a pair file")
    _add_io(p, "pairs", "report")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--form", choices=alignment.FORMS, default=alignment.LOG_RATIO)
    p.add_argument("--lambda-mode", choices=alignment.LAMBDA_MODES, default="rank")
    p.add_argument("--pairs-per-context", type=int)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("gradcheck", help="verify loss gradients by central differences")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("eval", help="EM / F1 / token length of generator responses")
    _add_io(p, "responses", "records", "out")
    p.add_argument("--max-answer-tokens", type=int)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("perturb", help="inject distractor passages at a noise-to-signal ratio")
    _add_io(p, "records", "pool", "out")
    p.add_argument("--nsr", type=int, required=True)
    p.add_argument("--seed", type=int, default=13)
    p.set_defaults(func=_cmd_perturb)

    p = sub.add_parser("export-ppo", help="write per-candidate reward records")
    p.add_argument("--in", dest="in_", required=True)
    _add_io(p, "out")
    p.set_defaults(func=_cmd_export)

    for name, func, help_ in (("run", _cmd_run, "run the full pipeline from a config file"),
                              ("sweep-tau", _cmd_sweep, "compare temperatures over the tau grid")):
        p = sub.add_parser(name, help=help_)
        _add_io(p, "config")
        p.add_argument("--no-dedup", action="store_true")
        p.add_argument("--uniform-weights", action="store_true")
        p.add_argument("--no-lambda", action="store_true")
        p.add_argument("--dataset-level-cov", action="store_true")
        if name == "sweep-tau":
            p.add_argument("--grid", type=float, nargs="+")
        p.set_defaults(func=func)

    p = sub.add_parser("make-demo", help="write the synthetic demo dataset and a config")
    _add_io(p, "out")
    p.add_argument("--seed", type=int, default=2024)
    p.set_defaults(func=_cmd_demo)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except Exception as exc:
        msg = str(exc)
        record = getattr(exc, "record_id", None)
        if record:
            msg += f" (record {record})"
        print(f"error: {msg}", file=sys.stderr)
        if args.verbose:
            raise
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Config-driven orchestration of the full stage graph with content-addressed caching.

A stage is skipped when the manifest from a previous run recorded the same
key (a hash over the stage's parameters and the bytes of its inputs) and its
outputs are still on disk with the recorded hashes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable

import yaml

from . import __version__, alignment, stages
from .dedup import DedupConfig
from .experts import Backends, HashedTF, TokenContainment, UnigramLM
from .records import ConfigError
from .remote import RemoteAnswerLogProb, RemoteEmbedding, RemoteEntailment, resolve_url
from .weighting import TAU_GRID

log = logging.getLogger(__name__)

EXPECTED_SAMPLES = 10


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str, record_id: str | None = None):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage
        self.record_id = record_id


@dataclass(frozen=True)
class Ablations:
    no_dedup: bool = False
    uniform_weights: bool = False
    no_lambda: bool = False
    dataset_level_cov: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    records: str
    samples: str
    out_dir: str
    responses: str | None = None
    dedup: DedupConfig = DedupConfig()
    experts: dict = field(default_factory=dict)
    tau: float = 1.0
    tau_grid: tuple[float, ...] = TAU_GRID
    beta: float = 0.1
    form: str = alignment.LOG_RATIO
    epochs: int = 200
    lr: float = 0.5
    seed: int = 7
    workers: int = 1
    max_answer_tokens: int | None = None
    pairs_per_context: int | None = None
    ablations: Ablations = Ablations()

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path = ".") -> "PipelineConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("records", "samples", "out_dir"):
            if key not in data:
                raise ConfigError(f"config is missing {key!r}")
        for key in ("records", "samples", "out_dir", "responses"):
            if data.get(key) is not None:
                data[key] = str(Path(base_dir) / data[key])
        if "dedup" in data:
            data["dedup"] = DedupConfig(**data["dedup"])
        if "ablations" in data:
            data["ablations"] = Ablations(**data["ablations"])
        if "tau_grid" in data:
            data["tau_grid"] = tuple(float(t) for t in data["tau_grid"])
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        return cls.from_dict(data, path.parent)

    def to_dict(self) -> dict:
        return asdict(self)

    def loss_config(self) -> alignment.LossConfig:
        return alignment.LossConfig(beta=self.beta, form=self.form,
                                    lambda_mode="unit" if self.ablations.no_lambda else "rank")


_BACKEND_TYPES = {
    "faithfulness": (TokenContainment, RemoteEntailment),
    "helpfulness": (UnigramLM, RemoteAnswerLogProb),
    "conciseness": (HashedTF, RemoteEmbedding),
}


def build_backends(spec: dict) -> Backends:
    """``{expert: "proxy" | {"remote": url}}``; missing experts use the proxy."""
    chosen = {}
    for expert, (proxy, remote) in _BACKEND_TYPES.items():
        sel = spec.get(expert, "proxy")
        if sel == "proxy":
            chosen[expert] = proxy()
        elif isinstance(sel, dict) and "remote" in sel:
            opts = {k: v for k, v in sel.items() if k in ("retries", "backoff", "timeout")}
            chosen[expert] = remote(resolve_url(sel["remote"]), **opts)
        else:
            raise ConfigError(f"bad backend selection for {expert}: {sel!r}")
    unknown = set(spec) - set(_BACKEND_TYPES)
    if unknown:
        raise ConfigError(f"unknown experts: {sorted(unknown)}")
    return Backends(**chosen)


def file_hash(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _canon(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, default=str)


class _Runner:
    def __init__(self, out_dir: Path, previous: dict):
        self.out_dir = out_dir
        self.previous = previous.get("stages", {})
        self.stages: dict[str, dict] = {}

    def stage(self, name: str, inputs: list[str], outputs: list[str], params: dict,
              fn: Callable[[], Any]) -> None:
        for p in inputs:
            if not Path(p).exists():
                raise PipelineError(name, f"input {p} does not exist")
        key = hashlib.sha256(_canon({
            "stage": name, "version": __version__, "params": params,
            "inputs": [file_hash(p) for p in inputs],
        }).encode()).hexdigest()
        prev = self.previous.get(name)
        if prev and prev.get("key") == key and all(
                Path(p).exists() and file_hash(p) == prev["outputs"].get(Path(p).name)
                for p in outputs):
            self.stages[name] = dict(prev, status="cached")
            log.info("%s: cached", name)
            return
        try:
            fn()
        except Exception as exc:
            raise PipelineError(name, str(exc), getattr(exc, "record_id", None)) from exc
        self.stages[name] = {"key": key, "status": "ran",
                             "outputs": {Path(p).name: file_hash(p) for p in outputs}}
        log.info("%s: ran", name)


def _write_manifest(path: Path, manifest: dict) -> None:
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run(config: PipelineConfig, *, through: str | None = None) -> dict:
    """Execute dedup → assess → weight → pairs → train-toy (→ eval) and return the manifest.

    ``through`` stops after the named stage.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    previous = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}
    runner = _Runner(out, previous)
    p = {name: str(out / name) for name in
         ("candidates.jsonl", "scored.jsonl", "ranked.jsonl", "pairs.jsonl", "report.json", "eval.jsonl")}
    ab = config.ablations
    backends = build_backends(config.experts)

    plan = [
        ("dedup", [config.samples], [p["candidates.jsonl"]],
         {"dedup": asdict(config.dedup), "no_dedup": ab.no_dedup},
         lambda: stages.run_dedup(config.samples, p["candidates.jsonl"], config.dedup, ab.no_dedup,
                                  EXPECTED_SAMPLES)),
        ("assess", [config.records, p["candidates.jsonl"]], [p["scored.jsonl"]],
         {"backends": backends.names()},
         lambda: stages.run_assess(config.records, p["candidates.jsonl"], p["scored.jsonl"],
                                   backends, config.workers)),
        ("weight", [p["scored.jsonl"]], [p["ranked.jsonl"]],
         {"tau": config.tau, "uniform": ab.uniform_weights, "dataset_level": ab.dataset_level_cov},
         lambda: stages.run_weight(p["scored.jsonl"], p["ranked.jsonl"], config.tau,
                                   ab.uniform_weights, ab.dataset_level_cov)),
        ("pairs", [p["ranked.jsonl"]], [p["pairs.jsonl"]], {"no_lambda": ab.no_lambda},
         lambda: stages.run_pairs(p["ranked.jsonl"], p["pairs.jsonl"], not ab.no_lambda)),
        ("train-toy", [p["pairs.jsonl"]], [p["report.json"]],
         {"epochs": config.epochs, "lr": config.lr, "loss": asdict(config.loss_config()),
          "seed": config.seed, "pairs_per_context": config.pairs_per_context},
         lambda: stages.run_train(p["pairs.jsonl"], p["report.json"], config.epochs, config.lr,
                                  config.loss_config(), config.seed, config.pairs_per_context)),
    ]
    if config.responses:
        plan.append(
            ("eval", [config.responses, config.records], [p["eval.jsonl"]],
             {"max_answer_tokens": config.max_answer_tokens},
             lambda: stages.run_eval(config.responses, config.records, p["eval.jsonl"],
                                     config.max_answer_tokens)))

    manifest = {
        "config_hash": hashlib.sha256(_canon(config.to_dict()).encode()).hexdigest(),
        "versions": {"evidence_align": __version__, "python": platform.python_version()},
        "stages": runner.stages,
    }
    try:
        for name, inputs, outputs, params, fn in plan:
            runner.stage(name, inputs, outputs, params, fn)
            if name == through:
                break
    except PipelineError as exc:
        manifest["failed"] = {"stage": exc.stage, "error": str(exc.__cause__ or exc),
                              "record_id": exc.record_id}
        _write_manifest(manifest_path, manifest)
        raise
    manifest["status"] = "cached" if all(s["status"] == "cached" for s in runner.stages.values()) else "ran"
    # keep entries of stages not reached this time so a partial run does not invalidate them
    carried = {k: dict(v, status="not-run") for k, v in previous.get("stages", {}).items()
               if k not in runner.stages}
    manifest["stages"] = {**carried, **runner.stages}
    _write_manifest(manifest_path, manifest)
    return manifest


SWEEP_COLUMNS = ("tau", "mrr", "top1", "initial_loss", "final_loss", "n_pairs", "error")


def sweep_tau(config: PipelineConfig) -> list[dict]:
    """Re-run weight → pairs → train-toy once per temperature in ``config.tau_grid``.

    Dedup and assessment run once. A failing temperature is reported in its
    row and the sweep continues.
    """
    if not config.tau_grid:
        raise ConfigError("tau_grid is empty")
    run(config, through="assess")
    out = Path(config.out_dir)
    scored = out / "scored.jsonl"
    ab = config.ablations
    rows = []
    for tau in config.tau_grid:
        sub = out / "sweep" / f"tau_{tau:g}"
        sub.mkdir(parents=True, exist_ok=True)
        row: dict[str, Any] = {"tau": tau}
        try:
            stages.run_weight(scored, sub / "ranked.jsonl", tau, ab.uniform_weights, ab.dataset_level_cov)
            stages.run_pairs(sub / "ranked.jsonl", sub / "pairs.jsonl", not ab.no_lambda)
            rep = stages.run_train(sub / "pairs.jsonl", sub / "report.json", config.epochs, config.lr,
                                   config.loss_config(), config.seed, config.pairs_per_context)
            row.update({k: rep[k] for k in ("mrr", "top1", "initial_loss", "final_loss", "n_pairs")})
            row["error"] = None
        except Exception as exc:  # one bad temperature must not sink the sweep
            log.error("tau=%g failed: %s", tau, exc)
            row.update({k: None for k in SWEEP_COLUMNS[1:-1]}, error=str(exc))
        rows.append(row)
    (out / "sweep.json").write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    lines = ["\t".join(SWEEP_COLUMNS)]
    lines += ["\t".join("" if r[c] is None else str(r[c]) for c in SWEEP_COLUMNS) for r in rows]
    (out / "sweep.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return rows

"""DPO / lambda-weighted DPO objectives, their gradients, and a tabular toy trainer.

Two forms of the inner preference margin are supported:

* ``log-ratio`` (default): ``beta * [(lw - lw_ref) - (ll - ll_ref)]``, the usual
  DPO algebra on log-probabilities.
* ``literal-ratio``: ``beta * [pw/pw_ref - pl/pl_ref]`` on raw probability
  ratios, i.e. ``beta * [exp(lw - lw_ref) - exp(ll - ll_ref)]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .preference import PreferencePair

LOG_RATIO = "log-ratio"
LITERAL_RATIO = "literal-ratio"
FORMS = (LOG_RATIO, LITERAL_RATIO)
LAMBDA_MODES = ("rank", "unit")


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class PolicyEval:
    logp_w_theta: float
    logp_l_theta: float
    logp_w_ref: float
    logp_l_ref: float

    def __post_init__(self):
        for name in ("logp_w_theta", "logp_l_theta", "logp_w_ref", "logp_l_ref"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class LossConfig:
    beta: float = 0.1
    form: str = LOG_RATIO
    lambda_mode: str = "rank"

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.form not in FORMS:
            raise ValueError(f"unknown loss form {self.form!r}; expected one of {FORMS}")
        if self.lambda_mode not in LAMBDA_MODES:
            raise ValueError(f"unknown lambda mode {self.lambda_mode!r}")


def softplus(x: float) -> float:
    return max(x, 0.0) + math.log1p(math.exp(-abs(x)))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def margin(ev: PolicyEval, cfg: LossConfig) -> float:
    u_w = ev.logp_w_theta - ev.logp_w_ref
    u_l = ev.logp_l_theta - ev.logp_l_ref
    if cfg.form == LOG_RATIO:
        return cfg.beta * (u_w - u_l)
    return cfg.beta * (math.exp(u_w) - math.exp(u_l))


def dpo_loss(ev: PolicyEval, cfg: LossConfig = LossConfig()) -> float:
    """``-log sigmoid(z)``, evaluated as ``softplus(-z)``."""
    return softplus(-margin(ev, cfg))


def lpo_loss(ev: PolicyEval, lam: float, cfg: LossConfig = LossConfig()) -> float:
    if lam < 0:
        raise ValueError(f"lambda weight must be non-negative, got {lam}")
    return lam * dpo_loss(ev, cfg)


def lpo_grad(ev: PolicyEval, lam: float, cfg: LossConfig = LossConfig()) -> tuple[float, float]:
    """Gradient of :func:`lpo_loss` w.r.t. ``(logp_w_theta, logp_l_theta)``."""
    if lam < 0:
        raise ValueError(f"lambda weight must be non-negative, got {lam}")
    coef = lam * cfg.beta * _sigmoid(-margin(ev, cfg))
    if cfg.form == LOG_RATIO:
        return -coef, coef
    return (-coef * math.exp(ev.logp_w_theta - ev.logp_w_ref),
            coef * math.exp(ev.logp_l_theta - ev.logp_l_ref))


def central_difference(ev: PolicyEval, lam: float, cfg: LossConfig, h: float = 1e-5) -> tuple[float, float]:
    def f(dw: float, dl: float) -> float:
        return lpo_loss(PolicyEval(ev.logp_w_theta + dw, ev.logp_l_theta + dl,
                                   ev.logp_w_ref, ev.logp_l_ref), lam, cfg)

    return ((f(h, 0.0) - f(-h, 0.0)) / (2 * h),
            (f(0.0, h) - f(0.0, -h)) / (2 * h))


def relative_error(a: Sequence[float], b: Sequence[float], floor: float = 1e-12) -> float:
    """``||a - b|| / max(||a||, ||b||)`` over the whole gradient vector."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), floor))


def gradcheck(trials: int = 1000, seed: int = 0, h: float = 1e-5,
              forms: Sequence[str] = FORMS, betas: Sequence[float] = (0.1, 0.5, 1.0)) -> dict:
    """Compare :func:`lpo_grad` against central differences on random draws.

    Log-probabilities are drawn from [-10, 0] and lambda from [0, 1]. Returns
    the worst relative error per loss form.
    """
    rng = np.random.default_rng(seed)
    worst = {}
    for form in forms:
        err = 0.0
        for _ in range(trials):
            lp = rng.uniform(-10.0, 0.0, size=4)
            cfg = LossConfig(beta=float(rng.choice(betas)), form=form)
            ev = PolicyEval(*map(float, lp))
            lam = float(rng.uniform(0.0, 1.0))
            analytic = lpo_grad(ev, lam, cfg)
            numeric = central_difference(ev, lam, cfg, h)
            err = max(err, relative_error(analytic, numeric))
        worst[form] = err
    return worst


# toy trainer ---------------------------------------------------------------

@dataclass
class ToyPolicy:
    """Tabular softmax policy: one logit per candidate of each context."""

    query_ids: list[str]
    candidates: list[list[int]]
    logits: list[np.ndarray]

    def probabilities(self, k: int) -> np.ndarray:
        z = self.logits[k] - self.logits[k].max()
        e = np.exp(z)
        return e / e.sum()

    def ranking(self, k: int) -> list[int]:
        """Candidate indices by descending logit, ties by ascending index."""
        order = sorted(range(len(self.candidates[k])),
                       key=lambda j: (-self.logits[k][j], self.candidates[k][j]))
        return [self.candidates[k][j] for j in order]


@dataclass
class _Batch:
    ctx: np.ndarray
    w: np.ndarray
    l: np.ndarray
    lam: np.ndarray
    mask: np.ndarray
    best: list[int]
    query_ids: list[str]
    candidates: list[list[int]]


def _as_pair(p) -> PreferencePair:
    return p if isinstance(p, PreferencePair) else PreferencePair.from_dict(p)


def _batch(pairs: Iterable, cfg: LossConfig, pairs_per_context: int | None, seed: int) -> _Batch:
    grouped: dict[str, list[PreferencePair]] = {}
    for p in map(_as_pair, pairs):
        grouped.setdefault(p.query_id, []).append(p)
    if not grouped:
        raise ValueError("empty pair dataset")
    rng = np.random.default_rng(seed)
    query_ids, candidates, best = [], [], []
    ctx, w, l, lam = [], [], [], []
    for k, (qid, plist) in enumerate(grouped.items()):
        ranks: dict[int, int] = {}
        for p in plist:
            ranks[p.winner_index] = p.r_w
            ranks[p.loser_index] = p.r_l
        cands = sorted(ranks)
        if len(cands) < 2:
            raise ValueError(f"context {qid!r} has fewer than 2 candidates")
        pos = {c: j for j, c in enumerate(cands)}
        query_ids.append(qid)
        candidates.append(cands)
        best.append(min(cands, key=lambda c: (ranks[c], c)))
        if pairs_per_context is not None and len(plist) > pairs_per_context:
            keep = np.sort(rng.choice(len(plist), size=pairs_per_context, replace=False))
            plist = [plist[i] for i in keep]
        for p in plist:
            ctx.append(k)
            w.append(pos[p.winner_index])
            l.append(pos[p.loser_index])
            lam.append(1.0 if cfg.lambda_mode == "unit" else p.weight)
    width = max(len(c) for c in candidates)
    mask = np.zeros((len(candidates), width), dtype=bool)
    for k, c in enumerate(candidates):
        mask[k, :len(c)] = True
    return _Batch(np.array(ctx), np.array(w), np.array(l), np.array(lam, dtype=float),
                  mask, best, query_ids, candidates)


def _log_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    z = np.where(mask, logits, -np.inf)
    m = z.max(axis=1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=1, keepdims=True))


def _loss_and_grad(logits: np.ndarray, ref: np.ndarray, b: _Batch, cfg: LossConfig):
    lsm = _log_softmax(logits, b.mask)
    u_w = lsm[b.ctx, b.w] - ref[b.ctx, b.w]
    u_l = lsm[b.ctx, b.l] - ref[b.ctx, b.l]
    if cfg.form == LOG_RATIO:
        z = cfg.beta * (u_w - u_l)
        dz_w, dz_l = cfg.beta, -cfg.beta
    else:
        e_w, e_l = np.exp(u_w), np.exp(u_l)
        z = cfg.beta * (e_w - e_l)
        dz_w, dz_l = cfg.beta * e_w, -cfg.beta * e_l
    n = len(z)
    loss = float(np.sum(b.lam * np.logaddexp(0.0, -z)) / n)
    # d softplus(-z)/dz = -sigmoid(-z)
    coef = -b.lam * (0.5 * (1.0 - np.tanh(0.5 * z))) / n
    g_lsm = np.zeros_like(logits)
    np.add.at(g_lsm, (b.ctx, b.w), coef * dz_w)
    np.add.at(g_lsm, (b.ctx, b.l), coef * dz_l)
    probs = np.exp(lsm)
    grad = g_lsm - probs * g_lsm.sum(axis=1, keepdims=True)
    return loss, np.where(b.mask, grad, 0.0)


@dataclass
class ToyReport:
    mrr: float
    top1: float
    initial_loss: float
    final_loss: float
    losses: list[float] = field(repr=False)
    n_contexts: int = 0
    n_pairs: int = 0

    def to_dict(self) -> dict:
        return {
            "mrr": self.mrr,
            "top1": self.top1,
            "initial_loss": self.initial_loss,
            "final_loss": self.final_loss,
            "n_contexts": self.n_contexts,
            "n_pairs": self.n_pairs,
            "losses": self.losses,
        }


def train_toy(pairs: Iterable, epochs: int = 200, lr: float = 0.5, cfg: LossConfig = LossConfig(),
              seed: int = 7, pairs_per_context: int | None = None) -> tuple[ToyPolicy, ToyReport]:
    """Full-batch gradient descent on the mean pair loss of a tabular policy.

    The reference policy is the uniform initial policy (all-zero logits) and
    stays frozen. ``losses[e]`` is the loss before update ``e``, so
    ``losses[-1]`` is the loss of the returned policy. ``seed`` only drives
    the optional per-context pair subsampling.
    """
    if epochs < 0:
        raise ValueError("epochs must be non-negative")
    b = _batch(pairs, cfg, pairs_per_context, seed)
    logits = np.zeros(b.mask.shape)
    ref = _log_softmax(logits, b.mask)
    losses = []
    for epoch in range(epochs + 1):
        loss, grad = _loss_and_grad(logits, ref, b, cfg)
        if not math.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
        losses.append(loss)
        if epoch < epochs:
            logits = logits - lr * grad

    policy = ToyPolicy(b.query_ids, b.candidates,
                       [logits[k, :len(c)].copy() for k, c in enumerate(b.candidates)])
    rr = []
    for k, best in enumerate(b.best):
        rr.append(1.0 / (policy.ranking(k).index(best) + 1))
    rr = np.array(rr)
    report = ToyReport(mrr=float(rr.mean()), top1=float(np.mean(rr == 1.0)),
                       initial_loss=losses[0], final_loss=losses[-1], losses=losses,
                       n_contexts=len(b.best), n_pairs=len(b.lam))
    return policy, report


def export_ppo_rewards(query_id: str, context: str, candidates: Sequence[str],
                       scores: Sequence[float]) -> list[dict]:
    """One reward record per candidate; the reward is its combined score."""
    return [
        {"query_id": query_id, "context": context, "candidate_index": i,
         "candidate": text, "reward": float(s)}
        for i, (text, s) in enumerate(zip(candidates, scores))
    ]

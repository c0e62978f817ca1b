"""Cross-validated hyperparameter campaigns.

Two grids: the base campaign sweeps batch size x learning rate x epochs
at a fixed adapter setting, the lora campaign sweeps alpha x rank at the
base campaign's winning configuration. Trials run on a worker pool;
results are deterministic in (dataset, seeds) and independent of worker
count and completion order.
"""

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .corpus.synth import base_channel, generate, grammar_vocabulary
from .errors import AtcLabError, BadK, EmptyResults, RankTooLargeForModel
from .model import LoraConfig, Model, ModelConfig, clone_model, inject_lora
from .training import (
    Dataset,
    EpochMetrics,
    TrainConfig,
    Vocab,
    dataset_from_streams,
    train,
)

BASE_LEARNING_RATES = (1e-5, 3e-5, 5e-4)
BASE_BATCH_SIZES = (6, 12)
BASE_EPOCHS = (3, 5)
BASE_FIXED_LORA = (32.0, 64)  # (alpha, rank) held fixed in the base campaign

# the base campaign's winning cell, reused for the lora campaign
WINNER_LR = 5e-4
WINNER_BATCH = 6
WINNER_EPOCHS = 5
LORA_ALPHAS = (256.0, 512.0)
LORA_RANKS = (256, 512)

DEFAULT_SCALE_DIVISOR = 32


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    n: int
    seed: int
    assignments: np.ndarray  # fold id per index

    def fold_sizes(self) -> list[int]:
        return np.bincount(self.assignments, minlength=self.k).tolist()

    def eval_indices(self, fold: int) -> np.ndarray:
        return np.where(self.assignments == fold)[0]

    def train_indices(self, fold: int) -> np.ndarray:
        return np.where(self.assignments != fold)[0]


def kfold_split(n: int, k: int, seed: int) -> FoldPlan:
    """Seeded shuffle of [0, n) chopped into k contiguous blocks; the
    first n mod k folds hold one extra element."""
    if k < 2 or n < k:
        raise BadK(f"need k >= 2 and n >= k, got n={n} k={k}")
    perm = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, k)
    assignments = np.empty(n, dtype=np.int64)
    pos = 0
    for fold in range(k):
        size = base + (1 if fold < extra else 0)
        assignments[perm[pos:pos + size]] = fold
        pos += size
    return FoldPlan(k, n, seed, assignments)


@dataclass(frozen=True)
class TrialConfig:
    campaign: str
    fold: int
    batch_size: int
    learning_rate: float
    epochs: int
    alpha: float
    rank: int
    targets: tuple
    seed: int

    def sort_key(self):
        return (self.campaign, self.fold, self.learning_rate,
                self.batch_size, self.epochs, self.alpha, self.rank)

    def to_dict(self):
        return {
            "campaign": self.campaign, "fold": self.fold,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate, "epochs": self.epochs,
            "alpha": self.alpha, "rank": self.rank,
            "targets": list(self.targets), "seed": self.seed,
        }


@dataclass(frozen=True)
class TrialResult:
    config: TrialConfig
    status: str  # "ok" | "failed"
    final_eval_wer: float | None
    final_eval_loss: float | None
    wall_clock_s: float
    epoch_metrics: tuple
    error: str = ""

    def to_dict(self):
        d = self.config.to_dict()
        d.update({
            "status": self.status,
            "final_eval_wer": self.final_eval_wer,
            "final_eval_loss": self.final_eval_loss,
            "wall_clock_s": self.wall_clock_s,
            "error": self.error,
            "epochs_log": [
                {"epoch": m.epoch, "train_loss": m.train_loss,
                 "eval_loss": m.eval_loss, "eval_wer": m.eval_wer,
                 "best_eval_wer": m.best_eval_wer,
                 "wall_clock_s": m.wall_clock_s}
                for m in self.epoch_metrics
            ],
        })
        return d


def _trial_seed(campaign_seed: int, campaign: str, fold: int, batch: int,
                lr: float, epochs: int, alpha: float, rank: int) -> int:
    """Stable per-trial seed: a hash of the campaign seed and the trial's
    own coordinates, so adding grid points never perturbs existing trials."""
    key = json.dumps([campaign_seed, campaign, fold, batch, repr(lr), epochs,
                      repr(alpha), rank])
    return int.from_bytes(
        hashlib.blake2b(key.encode(), digest_size=8).digest(), "little")


def scaled_lora(alpha: float, rank: int, divisor: int) -> tuple[float, int]:
    """Desk-scale rescale: divide both alpha and rank, preserving their
    ratio; rank stays a positive integer."""
    return alpha / divisor, max(1, round(rank / divisor))


def enumerate_grid(campaign: str, folds: int, seed: int = 0,
                   scale_divisor: int = DEFAULT_SCALE_DIVISOR,
                   targets: tuple = ("attn_q", "attn_v"),
                   lrs=None, batches=None, epochs_grid=None,
                   alphas=None, ranks=None) -> list[TrialConfig]:
    """Enumerate one campaign's trials, fold-major.

    Default grids reproduce the two campaigns (2x3x2 and 2x2 cells per
    fold); explicit grid arguments override them verbatim and are not
    rescaled. The divisor shrinks the default alpha/rank values while
    preserving their ratios, keeping ranks inside the desk-scale model.
    """
    if campaign not in ("base", "lora"):
        raise ValueError(f"campaign must be base or lora, got {campaign!r}")
    if folds < 1:
        raise BadK(f"folds must be >= 1, got {folds}")
    configs = []
    if campaign == "base":
        alpha, rank = scaled_lora(*BASE_FIXED_LORA, scale_divisor)
        for fold in range(folds):
            for lr in (lrs or BASE_LEARNING_RATES):
                for batch in (batches or BASE_BATCH_SIZES):
                    for epochs in (epochs_grid or BASE_EPOCHS):
                        configs.append(TrialConfig(
                            "base", fold, batch, lr, epochs, alpha, rank,
                            targets,
                            _trial_seed(seed, "base", fold, batch, lr,
                                        epochs, alpha, rank)))
    else:
        cells = ([(a, r) for a in alphas for r in ranks]
                 if alphas and ranks else
                 [scaled_lora(a, r, scale_divisor)
                  for a in LORA_ALPHAS for r in LORA_RANKS])
        for fold in range(folds):
            for alpha, rank in cells:
                configs.append(TrialConfig(
                    "lora", fold, WINNER_BATCH, WINNER_LR,
                    WINNER_EPOCHS, alpha, rank, targets,
                    _trial_seed(seed, "lora", fold, WINNER_BATCH,
                                WINNER_LR, WINNER_EPOCHS, alpha, rank)))
    return configs


def grammar_dataset(records) -> Dataset:
    """Dataset with the fixed grammar vocabulary (the model's word
    inventory is not corpus-dependent, mirroring a pretrained tokenizer)."""
    return dataset_from_streams(records, vocab=Vocab(grammar_vocabulary()))


def default_model_config(vocab_out: int, seed: int = 0) -> ModelConfig:
    return ModelConfig(vocab_in=68, vocab_out=vocab_out, seed=seed)


def pretrain_base_model(n_utterances: int, seed: int,
                        model_config: ModelConfig | None = None,
                        epochs: int = 4) -> Model:
    """Train a fresh model on a clean-channel synthetic corpus; campaigns
    fine-tune this stand-in for a pretrained transcription model."""
    records = [rec for rec, _ in generate(seed, n_utterances, base_channel())]
    ds = grammar_dataset(records)
    cfg = model_config or default_model_config(len(ds.vocab), seed=seed)
    model = Model(cfg)
    split = max(1, len(ds) // 10)
    train_ds = ds.subset(range(split, len(ds)))
    eval_ds = ds.subset(range(split))
    model, _ = train(model, train_ds, eval_ds,
                     TrainConfig(batch_size=12, learning_rate=5e-4,
                                 epochs=epochs, seed=seed))
    return model


def _validate_ranks(configs, base_model: Model):
    targeted_dims = {}
    for _, lin in base_model.adapted_linears():
        targeted_dims.setdefault(lin.role, min(lin.d_in, lin.d_out))
    for cfg in configs:
        limit = min(targeted_dims[t] for t in cfg.targets)
        if cfg.rank > limit:
            raise RankTooLargeForModel(
                f"rank {cfg.rank} exceeds {limit} for targets {cfg.targets}")


def run_trial(config: TrialConfig, dataset: Dataset, plan: FoldPlan,
              base_model: Model) -> TrialResult:
    t0 = time.perf_counter()
    try:
        model = clone_model(base_model)
        inject_lora(model, LoraConfig(config.alpha, config.rank,
                                      config.targets), seed=config.seed)
        train_ds = dataset.subset(plan.train_indices(config.fold))
        eval_ds = dataset.subset(plan.eval_indices(config.fold))
        _, metrics = train(model, train_ds, eval_ds,
                           TrainConfig(batch_size=config.batch_size,
                                       learning_rate=config.learning_rate,
                                       epochs=config.epochs,
                                       seed=config.seed, freeze_base=True))
        last = metrics[-1]
        return TrialResult(config, "ok", last.eval_wer, last.eval_loss,
                           time.perf_counter() - t0, tuple(metrics))
    except AtcLabError as exc:
        return TrialResult(config, "failed", None, None,
                           time.perf_counter() - t0, (), error=str(exc))


def run_campaign(configs, dataset: Dataset, workers: int,
                 base_model: Model, plan: FoldPlan | None = None) -> list[TrialResult]:
    """Execute every trial on a pool of `workers` threads; the result list
    follows the config order regardless of completion order. Per-trial
    failures are recorded, not raised."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    _validate_ranks(configs, base_model)
    if plan is None:
        k = max(c.fold for c in configs) + 1
        seed = min(c.seed for c in configs)
        plan = kfold_split(len(dataset), k, seed)
    if workers == 1:
        return [run_trial(c, dataset, plan, base_model) for c in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_trial, c, dataset, plan, base_model)
                   for c in configs]
        return [f.result() for f in futures]


def results_to_jsonl(results) -> str:
    return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n"
                   for r in results)


def load_results(path) -> list[TrialResult]:
    results = []
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            d = json.loads(line)
            config = TrialConfig(
                d["campaign"], d["fold"], d["batch_size"],
                d["learning_rate"], d["epochs"], d["alpha"], d["rank"],
                tuple(d["targets"]), d["seed"])
            metrics = tuple(
                EpochMetrics(m["epoch"], m["train_loss"], m["eval_loss"],
                             m["eval_wer"], m["best_eval_wer"],
                             m["wall_clock_s"])
                for m in d.get("epochs_log", ()))
            results.append(TrialResult(
                config, d["status"], d["final_eval_wer"],
                d["final_eval_loss"], d["wall_clock_s"], metrics,
                d.get("error", "")))
    return results


@dataclass(frozen=True)
class ReportBundle:
    table1: tuple  # (fold, lr, batch, epochs, wer)
    table2: tuple  # (fold, lr, batch, epochs, loss)
    table3: tuple  # (lr, batch, epochs, mean_time_s)
    table4: tuple  # (alpha, rank, mean_wer)
    # one series per (batch, epochs): x axis is the learning-rate grid
    fig1: tuple
    fig2: tuple
    fig3: tuple


def _mean(values) -> float:
    return sum(values) / len(values)


def aggregate(results) -> ReportBundle:
    """Pivot trial results into the four report tables and the averaged
    series behind the three figures. Failed trials are excluded."""
    ok = [r for r in results if r.status == "ok"]
    if not ok:
        raise EmptyResults("no successful trials to aggregate")
    # tables 1-3 describe the batch/lr/epochs sweep; restrict to the base
    # campaign when both campaigns are mixed in one result set
    sweep = [r for r in ok if r.config.campaign == "base"] or ok
    lora = [r for r in ok if r.config.campaign == "lora"] or ok

    rows1 = sorted(sweep, key=lambda r: r.config.sort_key())
    table1 = tuple((r.config.fold, r.config.learning_rate,
                    r.config.batch_size, r.config.epochs, r.final_eval_wer)
                   for r in rows1)
    table2 = tuple((r.config.fold, r.config.learning_rate,
                    r.config.batch_size, r.config.epochs, r.final_eval_loss)
                   for r in rows1)

    by_cell: dict = {}
    for r in sweep:
        key = (r.config.learning_rate, r.config.batch_size, r.config.epochs)
        by_cell.setdefault(key, []).append(r)
    table3 = tuple((lr, batch, epochs,
                    _mean([r.wall_clock_s for r in rs]))
                   for (lr, batch, epochs), rs in sorted(by_cell.items()))

    by_ar: dict = {}
    for r in lora:
        by_ar.setdefault((r.config.alpha, r.config.rank), []).append(r)
    table4 = tuple((alpha, rank, _mean([r.final_eval_wer for r in rs]))
                   for (alpha, rank), rs in sorted(by_ar.items()))

    lrs = sorted({r.config.learning_rate for r in sweep})
    figs = []
    for metric in ("final_eval_wer", "final_eval_loss", "wall_clock_s"):
        series = []
        for batch in sorted({r.config.batch_size for r in sweep}):
            for epochs in sorted({r.config.epochs for r in sweep}):
                ys = []
                for lr in lrs:
                    cell = [getattr(r, metric) for r in sweep
                            if (r.config.learning_rate, r.config.batch_size,
                                r.config.epochs) == (lr, batch, epochs)]
                    if cell:
                        ys.append(_mean(cell))
                if len(ys) == len(lrs):
                    series.append((f"batch {batch}, {epochs} epochs",
                                   tuple(lrs), tuple(ys)))
        figs.append(tuple(series))

    return ReportBundle(table1, table2, table3, table4,
                        figs[0], figs[1], figs[2])

"""Teacher-forced cross-entropy training, greedy decoding, evaluation.

The source side of an example is the pseudo-acoustic symbol stream
(shifted past the special ids), the target side is the word sequence of
the normalized transcript. Training is deterministic for a fixed seed.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .errors import EmptyDataset, NonFiniteLoss
from .model import Model
from .wer import corpus_wer

PAD, BOS, EOS, UNK = 0, 1, 2, 3
N_SPECIALS = 4
N_STREAM_SYMBOLS = 64

SRC_VOCAB_SIZE = N_SPECIALS + N_STREAM_SYMBOLS


class Vocab:
    """Word vocabulary for the target side; ids 0-3 are specials."""

    def __init__(self, words):
        self.words = tuple(sorted(set(words)))
        self._ids = {w: i + N_SPECIALS for i, w in enumerate(self.words)}

    def __len__(self):
        return N_SPECIALS + len(self.words)

    def encode(self, word: str) -> int:
        return self._ids.get(word, UNK)

    def decode(self, token_id: int) -> str:
        idx = token_id - N_SPECIALS
        if 0 <= idx < len(self.words):
            return self.words[idx]
        return "<unk>"

    def to_text(self, token_ids) -> str:
        return " ".join(self.decode(t) for t in token_ids)


@dataclass(frozen=True)
class Example:
    id: str
    src: np.ndarray  # symbol stream ids, EOS-terminated
    tgt: np.ndarray  # word ids, no specials
    ref_text: str


@dataclass(frozen=True)
class Dataset:
    examples: tuple
    vocab: Vocab

    def __len__(self):
        return len(self.examples)

    def subset(self, indices) -> "Dataset":
        return Dataset(tuple(self.examples[i] for i in indices), self.vocab)


def encode_symbols(symbols) -> np.ndarray:
    return np.array([s + N_SPECIALS for s in symbols] + [EOS], dtype=np.int64)


def make_examples(records, vocab: Vocab) -> tuple:
    out = []
    for rec in records:
        tgt = np.array([vocab.encode(w) for w in rec.text.split()], dtype=np.int64)
        out.append(Example(rec.id, encode_symbols(rec.symbols), tgt, rec.text))
    return tuple(out)


def dataset_from_streams(records, vocab: Vocab | None = None) -> Dataset:
    if vocab is None:
        words = sorted({w for r in records for w in r.text.split()})
        vocab = Vocab(words)
    return Dataset(make_examples(records, vocab), vocab)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 6
    learning_rate: float = 5e-4
    epochs: int = 3
    seed: int = 0
    freeze_base: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    grad_clip: float = 1.0
    max_steps: int | None = None
    decode_max_len: int = 24

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1 or self.learning_rate <= 0:
            raise ValueError("batch_size/epochs must be >= 1 and lr > 0")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    eval_loss: float
    eval_wer: float
    best_eval_wer: float
    wall_clock_s: float


class AdamW:
    """Adaptive-moment optimizer with decoupled weight decay; the decay is
    scaled by the learning rate, so lr = 0 is a strict no-op."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8,
                 weight_decay=0.01):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            update = (m / b1c) / (np.sqrt(v / b2c) + self.eps)
            p.data -= self.lr * (update + self.weight_decay * p.data)


def clip_gradients(params, max_norm: float) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = np.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return norm


def collate(examples) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pad a batch: returns (src, tgt_in, tgt_out) with PAD fill."""
    s_max = max(len(e.src) for e in examples)
    t_max = max(len(e.tgt) for e in examples) + 1
    b = len(examples)
    src = np.full((b, s_max), PAD, dtype=np.int64)
    tgt_in = np.full((b, t_max), PAD, dtype=np.int64)
    tgt_out = np.full((b, t_max), PAD, dtype=np.int64)
    for i, e in enumerate(examples):
        src[i, :len(e.src)] = e.src
        tgt_in[i, 0] = BOS
        tgt_in[i, 1:len(e.tgt) + 1] = e.tgt
        tgt_out[i, :len(e.tgt)] = e.tgt
        tgt_out[i, len(e.tgt)] = EOS
    return src, tgt_in, tgt_out


def cross_entropy(logits, targets: np.ndarray, pad_mask: np.ndarray | None = None):
    """Mean token cross-entropy over non-pad positions. Accepts (T, V) or
    (B, T, V) logits (Tensor or ndarray); targets shaped accordingly."""
    t = logits if isinstance(logits, ag.Tensor) else ag.Tensor(logits)
    targets = np.asarray(targets)
    v = t.data.shape[-1]
    flat = ag.reshape(t, (-1, v))
    flat_targets = targets.reshape(-1)
    mask = (flat_targets != PAD) if pad_mask is None else np.asarray(pad_mask).reshape(-1)
    return ag.cross_entropy_logits(flat, flat_targets, mask)


def _batches(n, batch_size, order):
    for i in range(0, n, batch_size):
        yield order[i:i + batch_size]


def train(model: Model, train_set: Dataset, eval_set: Dataset,
          config: TrainConfig):
    """Returns (model, per-epoch metrics). Shuffling, batching and the
    optimizer all derive from config.seed; a fixed seed reproduces the
    metrics sequence exactly (wall clock aside)."""
    if len(train_set) == 0 or len(eval_set) == 0:
        raise EmptyDataset("train and eval sets must be non-empty")
    if config.freeze_base and model.lora is None:
        raise ValueError("freeze_base requires injected adapters")
    params = [p for _, p in model.trainable_parameters()]
    opt = AdamW(params, config.learning_rate, config.beta1, config.beta2,
                config.eps, config.weight_decay)
    rng = np.random.default_rng(config.seed)
    metrics: list[EpochMetrics] = []
    best_wer = float("inf")
    steps = 0
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_set))
        loss_sum = 0.0
        token_sum = 0
        for idx in _batches(len(train_set), config.batch_size, order):
            if config.max_steps is not None and steps >= config.max_steps:
                break
            src, tgt_in, tgt_out = collate([train_set.examples[i] for i in idx])
            logits = model.forward_batch(src, tgt_in)
            loss = cross_entropy(logits, tgt_out)
            value = float(loss.data)
            if not np.isfinite(value):
                raise NonFiniteLoss(f"loss became {value} at step {steps}")
            loss.backward()
            clip_gradients(params, config.grad_clip)
            opt.step()
            opt.zero_grad()
            n_tokens = int((tgt_out != PAD).sum())
            loss_sum += value * n_tokens
            token_sum += n_tokens
            steps += 1
        train_loss = loss_sum / token_sum if token_sum else float("nan")
        eval_loss, eval_wer, _ = evaluate(model, eval_set,
                                          max_len=config.decode_max_len)
        best_wer = min(best_wer, eval_wer)
        metrics.append(EpochMetrics(epoch, train_loss, eval_loss, eval_wer,
                                    best_wer, time.perf_counter() - t0))
        if config.max_steps is not None and steps >= config.max_steps:
            break
    return model, metrics


def decode_greedy(model: Model, src_tokens, max_len: int) -> list[int]:
    """Greedy decode one source sequence: argmax per step (ties resolve to
    the lowest token id), stopping at EOS or after max_len tokens."""
    src = np.asarray(src_tokens, dtype=np.int64)[None, :]
    out = [BOS]
    with ag.no_grad():
        memory, key_mask = model.encode(src)
        while len(out) - 1 < max_len:
            logits = model.decode(memory, key_mask, np.array([out]))
            nxt = int(np.argmax(logits.data[0, -1]))
            if nxt == EOS:
                break
            out.append(nxt)
    return out[1:]


def decode_greedy_batch(model: Model, sources, max_len: int,
                        chunk_size: int = 64) -> list[list[int]]:
    """Batched greedy decode; equivalent to decode_greedy per sequence."""
    results: list[list[int]] = []
    with ag.no_grad():
        for start in range(0, len(sources), chunk_size):
            chunk = sources[start:start + chunk_size]
            b = len(chunk)
            s_max = max(len(s) for s in chunk)
            src = np.full((b, s_max), PAD, dtype=np.int64)
            for i, s in enumerate(chunk):
                src[i, :len(s)] = s
            memory, key_mask = model.encode(src)
            tgt = np.full((b, 1), BOS, dtype=np.int64)
            done = np.zeros(b, dtype=bool)
            outs: list[list[int]] = [[] for _ in range(b)]
            for _ in range(max_len):
                logits = model.decode(memory, key_mask, tgt).data[:, -1, :]
                nxt = logits.argmax(axis=-1)
                nxt = np.where(done, PAD, nxt)
                done |= nxt == EOS
                for i in range(b):
                    if not done[i] and nxt[i] != EOS:
                        outs[i].append(int(nxt[i]))
                if done.all():
                    break
                tgt = np.concatenate([tgt, nxt[:, None]], axis=1)
            results.extend(outs)
    return results


def evaluate(model: Model, eval_set: Dataset, max_len: int = 24,
             chunk_size: int = 64):
    """Teacher-forced loss plus pooled WER of greedy decodes against the
    normalized references. Returns (eval_loss, eval_wer, reports)."""
    if len(eval_set) == 0:
        raise EmptyDataset("eval set is empty")
    loss_sum = 0.0
    token_sum = 0
    with ag.no_grad():
        for start in range(0, len(eval_set), chunk_size):
            batch = eval_set.examples[start:start + chunk_size]
            src, tgt_in, tgt_out = collate(batch)
            logits = model.forward_batch(src, tgt_in)
            loss = float(cross_entropy(logits, tgt_out).data)
            n_tokens = int((tgt_out != PAD).sum())
            loss_sum += loss * n_tokens
            token_sum += n_tokens
    hyps = decode_greedy_batch(model, [e.src for e in eval_set.examples],
                               max_len, chunk_size)
    pairs = [(e.ref_text, eval_set.vocab.to_text(h))
             for e, h in zip(eval_set.examples, hyps)]
    pooled, reports = corpus_wer(pairs)
    return loss_sum / token_sum, pooled, reports

"""Miniature encoder-decoder transcription model with LoRA adapters.

Pre-norm transformer, float64 throughout. Every dense map is an
AdaptedLinear: a frozen-able base (W, bias) plus optional low-rank
factors (A, B) scaled by alpha/rank. Freshly injected adapters have
B = 0, so injection leaves model outputs bitwise unchanged.
"""

import copy
import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import (
    DimensionMismatch,
    NothingToMerge,
    NothingToUnmerge,
    RankTooLarge,
    SequenceTooLong,
    TokenOutOfRange,
)

PAD = 0
NEG_INF = -1e30

LORA_TARGETS = ("attn_q", "attn_k", "attn_v", "attn_o", "ffn_in", "ffn_out")


@dataclass(frozen=True)
class LoraConfig:
    alpha: float
    rank: int
    targets: tuple = ("attn_q", "attn_v")

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        unknown = set(self.targets) - set(LORA_TARGETS)
        if unknown:
            raise ValueError(f"unknown LoRA targets {sorted(unknown)}")

    def to_dict(self):
        return {"alpha": self.alpha, "rank": self.rank,
                "targets": list(self.targets)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["alpha"], d["rank"], tuple(d["targets"]))


@dataclass(frozen=True)
class ModelConfig:
    vocab_in: int
    vocab_out: int
    d_model: int = 64
    n_heads: int = 4
    d_ff: int = 128
    n_enc_layers: int = 2
    n_dec_layers: int = 2
    max_len: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("n_heads must divide d_model")
        for name in ("vocab_in", "vocab_out", "d_model", "n_heads", "d_ff",
                     "n_enc_layers", "n_dec_layers", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def to_dict(self):
        return {k: getattr(self, k) for k in (
            "vocab_in", "vocab_out", "d_model", "n_heads", "d_ff",
            "n_enc_layers", "n_dec_layers", "max_len", "seed")}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class AdaptedLinear:
    """y = W x + bias, plus (alpha/rank) * B (A x) when an adapter is
    present and enabled. W is (d_out, d_in); A is (rank, d_in); B is
    (d_out, rank) and starts at zero."""

    def __init__(self, d_in: int, d_out: int, role: str, rng, scale=None):
        self.d_in = d_in
        self.d_out = d_out
        self.role = role
        std = scale if scale is not None else np.sqrt(2.0 / (d_in + d_out))
        self.w = Tensor(rng.normal(0.0, std, (d_out, d_in)), requires_grad=True)
        self.bias = Tensor(np.zeros(d_out), requires_grad=True)
        self.a = None
        self.b = None
        self.alpha = 0.0
        self.rank = 0
        self.enabled = False
        self._merged = None  # (a, b, scale) recorded by merge for unmerge

    def inject(self, alpha: float, rank: int, rng):
        if rank > min(self.d_in, self.d_out):
            raise RankTooLarge(
                f"rank {rank} exceeds min dim {min(self.d_in, self.d_out)} "
                f"of {self.role}")
        self.a = Tensor(rng.normal(0.0, 1.0 / rank, (rank, self.d_in)),
                        requires_grad=True)
        self.b = Tensor(np.zeros((self.d_out, rank)), requires_grad=True)
        self.alpha = float(alpha)
        self.rank = int(rank)
        self.enabled = True

    @property
    def has_adapter(self) -> bool:
        return self.a is not None

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.shape[-1] != self.d_in:
            raise DimensionMismatch(
                f"{self.role}: input width {x.data.shape[-1]} != {self.d_in}")
        y = ag.add(ag.matmul(x, ag.swapaxes(self.w, 0, 1)), self.bias)
        if self.has_adapter and self.enabled:
            # With B = 0 the adapter contributes exactly nothing, so the
            # no-grad path skips it to keep outputs bitwise identical to
            # the base layer; under grad it must stay taped for B to move.
            if ag.grad_enabled() or np.any(self.b.data):
                z = ag.matmul(ag.matmul(x, ag.swapaxes(self.a, 0, 1)),
                              ag.swapaxes(self.b, 0, 1))
                y = ag.add(y, ag.scale(z, self.alpha / self.rank))
        return y

    def base_parameters(self):
        return [(f"{self.role}.w", self.w), (f"{self.role}.bias", self.bias)]

    def adapter_parameters(self):
        if not self.has_adapter:
            return []
        return [(f"{self.role}.a", self.a), (f"{self.role}.b", self.b)]


def lora_forward(layer: AdaptedLinear, x: np.ndarray) -> np.ndarray:
    """Apply one adapted layer to a single d_in vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {x.shape}")
    with ag.no_grad():
        return layer(Tensor(x[None, :])).data[0]


class LayerNorm:
    def __init__(self, d_model: int):
        self.gamma = Tensor(np.ones(d_model), requires_grad=True)
        self.beta = Tensor(np.zeros(d_model), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ag.layer_norm(x, self.gamma, self.beta)

    def base_parameters(self):
        return [("gamma", self.gamma), ("beta", self.beta)]


class MultiHeadAttention:
    def __init__(self, d_model: int, n_heads: int, rng):
        self.n_heads = n_heads
        self.head_dim = d_model // n_heads
        self.q = AdaptedLinear(d_model, d_model, "attn_q", rng)
        self.k = AdaptedLinear(d_model, d_model, "attn_k", rng)
        self.v = AdaptedLinear(d_model, d_model, "attn_v", rng)
        self.o = AdaptedLinear(d_model, d_model, "attn_o", rng)

    def _split(self, t: Tensor, b: int, length: int) -> Tensor:
        t = ag.reshape(t, (b, length, self.n_heads, self.head_dim))
        return ag.swapaxes(t, 1, 2)

    def __call__(self, x_q: Tensor, x_kv: Tensor, mask) -> Tensor:
        b, t_q, d = x_q.data.shape
        t_k = x_kv.data.shape[1]
        q = self._split(self.q(x_q), b, t_q)
        k = self._split(self.k(x_kv), b, t_k)
        v = self._split(self.v(x_kv), b, t_k)
        scores = ag.scale(ag.matmul(q, ag.swapaxes(k, 2, 3)),
                          1.0 / np.sqrt(self.head_dim))
        if mask is not None:
            scores = ag.add_const(scores, mask)
        ctx = ag.matmul(ag.softmax(scores), v)
        ctx = ag.reshape(ag.swapaxes(ctx, 1, 2), (b, t_q, d))
        return self.o(ctx)

    def linears(self):
        return [self.q, self.k, self.v, self.o]


class FeedForward:
    def __init__(self, d_model: int, d_ff: int, rng):
        self.fin = AdaptedLinear(d_model, d_ff, "ffn_in", rng)
        self.fout = AdaptedLinear(d_ff, d_model, "ffn_out", rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fout(ag.gelu(self.fin(x)))

    def linears(self):
        return [self.fin, self.fout]


class EncoderLayer:
    def __init__(self, cfg: ModelConfig, rng):
        self.ln1 = LayerNorm(cfg.d_model)
        self.attn = MultiHeadAttention(cfg.d_model, cfg.n_heads, rng)
        self.ln2 = LayerNorm(cfg.d_model)
        self.ffn = FeedForward(cfg.d_model, cfg.d_ff, rng)

    def __call__(self, x: Tensor, mask) -> Tensor:
        h = self.ln1(x)
        x = ag.add(x, self.attn(h, h, mask))
        return ag.add(x, self.ffn(self.ln2(x)))


class DecoderLayer:
    def __init__(self, cfg: ModelConfig, rng):
        self.ln1 = LayerNorm(cfg.d_model)
        self.self_attn = MultiHeadAttention(cfg.d_model, cfg.n_heads, rng)
        self.ln2 = LayerNorm(cfg.d_model)
        self.cross_attn = MultiHeadAttention(cfg.d_model, cfg.n_heads, rng)
        self.ln3 = LayerNorm(cfg.d_model)
        self.ffn = FeedForward(cfg.d_model, cfg.d_ff, rng)

    def __call__(self, x: Tensor, memory: Tensor, self_mask, cross_mask) -> Tensor:
        h = self.ln1(x)
        x = ag.add(x, self.self_attn(h, h, self_mask))
        x = ag.add(x, self.cross_attn(self.ln2(x), memory, cross_mask))
        return ag.add(x, self.ffn(self.ln3(x)))


def sinusoidal_table(max_len: int, d_model: int) -> np.ndarray:
    pos = np.arange(max_len)[:, None]
    idx = np.arange(0, d_model, 2)
    angles = pos / np.power(10000.0, idx / d_model)
    table = np.zeros((max_len, d_model))
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles[:, : d_model // 2])
    return table


class Model:
    def __init__(self, config: ModelConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        std = 1.0 / np.sqrt(config.d_model)
        self.src_embed = Tensor(rng.normal(0, std, (config.vocab_in, config.d_model)),
                                requires_grad=True)
        self.tgt_embed = Tensor(rng.normal(0, std, (config.vocab_out, config.d_model)),
                                requires_grad=True)
        self.pos = sinusoidal_table(config.max_len, config.d_model)
        self.enc_layers = [EncoderLayer(config, rng) for _ in range(config.n_enc_layers)]
        self.dec_layers = [DecoderLayer(config, rng) for _ in range(config.n_dec_layers)]
        self.enc_norm = LayerNorm(config.d_model)
        self.dec_norm = LayerNorm(config.d_model)
        self.out_proj = AdaptedLinear(config.d_model, config.vocab_out,
                                      "out_proj", rng, scale=std)
        self.lora: LoraConfig | None = None

    # --- parameter walks (deterministic order) ---

    def adapted_linears(self):
        out = []
        for i, layer in enumerate(self.enc_layers):
            out += [(f"enc.{i}", lin)
                    for lin in layer.attn.linears() + layer.ffn.linears()]
        for i, layer in enumerate(self.dec_layers):
            out += [(f"dec.{i}.self", lin) for lin in layer.self_attn.linears()]
            out += [(f"dec.{i}.cross", lin) for lin in layer.cross_attn.linears()]
            out += [(f"dec.{i}", lin) for lin in layer.ffn.linears()]
        return out + [("head", self.out_proj)]

    def _norms(self):
        out = []
        for i, layer in enumerate(self.enc_layers):
            out += [(f"enc.{i}.ln1", layer.ln1), (f"enc.{i}.ln2", layer.ln2)]
        for i, layer in enumerate(self.dec_layers):
            out += [(f"dec.{i}.ln1", layer.ln1), (f"dec.{i}.ln2", layer.ln2),
                    (f"dec.{i}.ln3", layer.ln3)]
        out += [("enc.norm", self.enc_norm), ("dec.norm", self.dec_norm)]
        return out

    def named_base_parameters(self):
        params = [("src_embed", self.src_embed), ("tgt_embed", self.tgt_embed)]
        for prefix, lin in self.adapted_linears():
            params += [(f"{prefix}.{n}", p) for n, p in lin.base_parameters()]
        for prefix, norm in self._norms():
            params += [(f"{prefix}.{n}", p) for n, p in norm.base_parameters()]
        return params

    def named_adapter_parameters(self):
        params = []
        for prefix, lin in self.adapted_linears():
            params += [(f"{prefix}.{n}", p) for n, p in lin.adapter_parameters()]
        return params

    def named_parameters(self):
        return self.named_base_parameters() + self.named_adapter_parameters()

    def trainable_parameters(self):
        return [(n, p) for n, p in self.named_parameters() if p.requires_grad]

    # --- forward ---

    def _check_tokens(self, ids: np.ndarray, vocab: int, what: str):
        if len(ids) and (ids.min() < 0 or ids.max() >= vocab):
            raise TokenOutOfRange(f"{what} token outside [0, {vocab})")
        if ids.shape[-1] > self.config.max_len:
            raise SequenceTooLong(
                f"{what} length {ids.shape[-1]} > max_len {self.config.max_len}")

    def encode(self, src: np.ndarray) -> tuple[Tensor, np.ndarray]:
        """src: (B, S) ids. Returns (memory, key_pad_mask (B,1,1,S))."""
        src = np.asarray(src)
        self._check_tokens(src, self.config.vocab_in, "source")
        b, s = src.shape
        x = ag.add_const(ag.embedding(self.src_embed, src), self.pos[:s])
        key_mask = np.where(src == PAD, NEG_INF, 0.0)[:, None, None, :]
        for layer in self.enc_layers:
            x = layer(x, key_mask)
        return self.enc_norm(x), key_mask

    def decode(self, memory: Tensor, src_key_mask: np.ndarray,
               tgt: np.ndarray) -> Tensor:
        """tgt: (B, T) decoder input ids. Returns logits Tensor (B, T, V)."""
        tgt = np.asarray(tgt)
        self._check_tokens(tgt, self.config.vocab_out, "target")
        b, t = tgt.shape
        x = ag.add_const(ag.embedding(self.tgt_embed, tgt), self.pos[:t])
        causal = np.triu(np.full((t, t), NEG_INF), k=1)[None, None, :, :]
        tgt_key_mask = np.where(tgt == PAD, NEG_INF, 0.0)[:, None, None, :]
        self_mask = causal + tgt_key_mask
        for layer in self.dec_layers:
            x = layer(x, memory, self_mask, src_key_mask)
        return self.out_proj(self.dec_norm(x))

    def forward_batch(self, src: np.ndarray, tgt: np.ndarray) -> Tensor:
        memory, key_mask = self.encode(src)
        return self.decode(memory, key_mask, tgt)

    def forward(self, src_tokens, tgt_prefix_tokens) -> np.ndarray:
        """Single-sequence logits: (len(tgt_prefix), vocab_out)."""
        src = np.asarray(src_tokens)[None, :]
        tgt = np.asarray(tgt_prefix_tokens)[None, :]
        with ag.no_grad():
            return self.forward_batch(src, tgt).data[0]


# --- LoRA surgery ---


def inject_lora(model: Model, config: LoraConfig, seed: int) -> Model:
    """Give every targeted linear a fresh (A, B) pair and freeze all base
    parameters. B starts at zero, so model outputs are unchanged."""
    targeted = [(p, lin) for p, lin in model.adapted_linears()
                if lin.role in config.targets]
    for _, lin in targeted:
        if config.rank > min(lin.d_in, lin.d_out):
            raise RankTooLarge(
                f"rank {config.rank} too large for {lin.role} "
                f"({lin.d_out}x{lin.d_in})")
    rng = np.random.default_rng(seed)
    for _, lin in targeted:
        lin.inject(config.alpha, config.rank, rng)
    for _, p in model.named_base_parameters():
        p.requires_grad = False
    model.lora = config
    return model


def merge_lora(model: Model) -> Model:
    """Fold each enabled adapter into its base weight: W += (alpha/r) B A.
    The factors are recorded so unmerge_lora can restore W exactly."""
    merged_any = False
    for _, lin in model.adapted_linears():
        if lin.has_adapter and lin.enabled:
            s = lin.alpha / lin.rank
            lin.w.data = lin.w.data + s * (lin.b.data @ lin.a.data)
            lin._merged = (lin.a.data.copy(), lin.b.data.copy(), s)
            lin.enabled = False
            merged_any = True
    if not merged_any:
        raise NothingToMerge("no enabled adapters to merge")
    return model


def unmerge_lora(model: Model) -> Model:
    unmerged_any = False
    for _, lin in model.adapted_linears():
        if lin._merged is not None:
            a, b, s = lin._merged
            lin.w.data = lin.w.data - s * (b @ a)
            lin._merged = None
            lin.enabled = True
            unmerged_any = True
    if not unmerged_any:
        raise NothingToUnmerge("nothing was merged")
    return model


def set_adapters_enabled(model: Model, enabled: bool) -> None:
    for _, lin in model.adapted_linears():
        if lin.has_adapter:
            lin.enabled = enabled


def trainable_parameter_count(model: Model) -> int:
    return sum(p.data.size for _, p in model.named_parameters() if p.requires_grad)


def total_parameter_count(model: Model) -> int:
    return sum(p.data.size for _, p in model.named_parameters())


def base_weight_bytes(model: Model) -> bytes:
    """Serialized base parameters, for freeze/forgetting guards."""
    return b"".join(p.data.tobytes() for _, p in model.named_base_parameters())


def clone_model(model: Model) -> Model:
    return copy.deepcopy(model)


# --- checkpoint container ---
#
# Layout: magic "ATCLABCK", u32 version, u64 header length, UTF-8 JSON
# header, then the named float64 arrays back to back in header order,
# little-endian. Adapter-only checkpoints carry the LoRA config plus a
# hash of the base weights they expect to sit on.

_MAGIC = b"ATCLABCK"


def _write_container(path, header: dict, arrays: list[tuple[str, np.ndarray]]):
    header = dict(header)
    header["arrays"] = [{"name": n, "shape": list(a.shape)} for n, a in arrays]
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<IQ", 1, len(blob)))
        f.write(blob)
        for _, a in arrays:
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def _read_container(path):
    with open(path, "rb") as f:
        if f.read(8) != _MAGIC:
            raise ValueError(f"{path} is not an atclab checkpoint")
        _version, hlen = struct.unpack("<IQ", f.read(12))
        header = json.loads(f.read(hlen))
        arrays = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(8 * n), dtype="<f8").reshape(shape)
            if not np.isfinite(data).all():
                raise ValueError(f"non-finite values in {entry['name']}")
            arrays[entry["name"]] = data.copy()
    return header, arrays


def base_hash(model: Model) -> str:
    return hashlib.blake2b(base_weight_bytes(model), digest_size=16).hexdigest()


def save_checkpoint(model: Model, path, seed: int = 0) -> None:
    header = {
        "kind": "full",
        "config": model.config.to_dict(),
        "lora": model.lora.to_dict() if model.lora else None,
        "seed": seed,
    }
    _write_container(path, header, [(n, p.data) for n, p in model.named_parameters()])


def save_adapters(model: Model, path, seed: int = 0) -> None:
    if model.lora is None:
        raise NothingToMerge("model has no adapters to save")
    header = {
        "kind": "adapters",
        "lora": model.lora.to_dict(),
        "seed": seed,
        "base_hash": base_hash(model),
    }
    _write_container(path, header,
                     [(n, p.data) for n, p in model.named_adapter_parameters()])


def load_checkpoint(path) -> Model:
    header, arrays = _read_container(path)
    if header["kind"] != "full":
        raise ValueError("not a full checkpoint; use load_adapters")
    model = Model(ModelConfig.from_dict(header["config"]))
    if header["lora"]:
        inject_lora(model, LoraConfig.from_dict(header["lora"]), seed=0)
    for name, p in model.named_parameters():
        p.data = arrays[name]
    return model


def load_adapters(path, model: Model) -> Model:
    """Recombine an adapter-only checkpoint with a base model."""
    header, arrays = _read_container(path)
    if header["kind"] != "adapters":
        raise ValueError("not an adapter checkpoint")
    if header["base_hash"] != base_hash(model):
        raise ValueError("adapter checkpoint was trained on a different base")
    inject_lora(model, LoraConfig.from_dict(header["lora"]), seed=0)
    for name, p in model.named_adapter_parameters():
        p.data = arrays[name]
    return model

"""Transformer encoder-decoder for speech: conv stem, sinusoidal encoder
positions, learned decoder positions, pre-LN blocks, tied output projection.

Sizes follow the published family table (tiny through large) plus a `toy`
preset small enough to train on a desktop CPU in minutes. All math runs in
float64 on the autodiff tape.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .audio import LOG_FLOOR, LogMelSpectrogram
from .autodiff import Tensor
from .errors import EmptyLoss, InvalidDim, ShapeError
from .script import EOS_ID, SOS_ID, Vocabulary, vocab_from_json, vocab_to_json

CHECKPOINT_VERSION = 1
NEG_INF = -1e9  # additive mask value; finite so softmax gradients stay clean

# Log-mel inputs span roughly [LOG_FLOOR, 0]; map them near [-1, 1] before
# the conv stem so early layers start in the well-conditioned GELU region.
MEL_INPUT_OFFSET = -LOG_FLOOR / 2.0
MEL_INPUT_SCALE = -LOG_FLOOR / 2.0


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int
    d_model: int
    n_heads: int
    n_mels: int = 80
    vocab_size: int = 51865
    max_audio_frames: int = 1500
    max_text_tokens: int = 448
    mlp_dropout: float = 0.0
    attn_dropout: float = 0.0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise InvalidDim(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )
        for name in ("mlp_dropout", "attn_dropout"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise InvalidDim(f"{name} must lie in [0, 1), got {p}")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def presets() -> dict[str, ModelConfig]:
    """Named size presets: layer count, width, heads per the model family."""
    table = {
        "tiny": (4, 384, 6),
        "base": (6, 512, 8),
        "small": (12, 768, 12),
        "medium": (24, 1024, 16),
        "large": (32, 1280, 20),
    }
    out = {
        name: ModelConfig(n_layers=l, d_model=d, n_heads=h)
        for name, (l, d, h) in table.items()
    }
    out["toy"] = ModelConfig(
        n_layers=2,
        d_model=64,
        n_heads=4,
        vocab_size=64,
        max_audio_frames=125,
        max_text_tokens=64,
    )
    return out


def count_parameters(cfg: ModelConfig) -> int:
    """Closed-form trainable parameter count.

    conv1: d*n_mels*3 + d            conv2: 3*d^2 + d
    encoder layer: 12*d^2 + 13*d     (qkvo 4(d^2+d), mlp 8d^2+5d, 2 LN 4d)
    decoder layer: 16*d^2 + 19*d     (adds the cross-attention block + LN)
    plus final LNs (2d each), tied token embedding V*d, learned decoder
    positions T_text*d. Sinusoidal encoder positions are not trainable.
    """
    d, L = cfg.d_model, cfg.n_layers
    total = d * cfg.n_mels * 3 + d
    total += 3 * d * d + d
    total += L * (12 * d * d + 13 * d)
    total += 2 * d
    total += cfg.vocab_size * d
    total += cfg.max_text_tokens * d
    total += L * (16 * d * d + 19 * d)
    total += 2 * d
    return total


def sinusoidal_embeddings(n_pos: int, d: int) -> np.ndarray:
    """Interleaved sin/cos position table, wavelengths 2*pi .. 10000*2*pi."""
    if d % 2 != 0:
        raise InvalidDim(f"embedding width must be even, got {d}")
    pos = np.arange(n_pos)[:, None]
    dim = np.arange(d // 2)[None, :]
    angle = pos / (10000.0 ** (2 * dim / d))
    pe = np.zeros((n_pos, d))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe


def _param_spec(cfg: ModelConfig) -> list[tuple[str, tuple, str]]:
    """Canonical (name, shape, init kind) list; order fixes the init RNG stream."""
    d = cfg.d_model
    spec: list[tuple[str, tuple, str]] = [
        ("conv1.w", (d, cfg.n_mels, 3), "normal"),
        ("conv1.b", (d,), "zeros"),
        ("conv2.w", (d, d, 3), "normal"),
        ("conv2.b", (d,), "zeros"),
    ]

    def linear(prefix):
        spec.append((f"{prefix}.w", (d, d), "normal"))
        spec.append((f"{prefix}.b", (d,), "zeros"))

    def attn(prefix):
        for proj in ("q", "k", "v", "o"):
            linear(f"{prefix}.{proj}")

    def ln(prefix):
        spec.append((f"{prefix}.g", (d,), "ones"))
        spec.append((f"{prefix}.b", (d,), "zeros"))

    def mlp(prefix):
        spec.append((f"{prefix}.fc.w", (d, 4 * d), "normal"))
        spec.append((f"{prefix}.fc.b", (4 * d,), "zeros"))
        spec.append((f"{prefix}.proj.w", (4 * d, d), "normal"))
        spec.append((f"{prefix}.proj.b", (d,), "zeros"))

    for i in range(cfg.n_layers):
        ln(f"enc.{i}.attn.ln")
        attn(f"enc.{i}.attn")
        ln(f"enc.{i}.mlp.ln")
        mlp(f"enc.{i}.mlp")
    ln("enc.ln")
    spec.append(("tok_emb", (cfg.vocab_size, d), "normal"))
    spec.append(("dec_pos", (cfg.max_text_tokens, d), "normal"))
    for i in range(cfg.n_layers):
        ln(f"dec.{i}.self.ln")
        attn(f"dec.{i}.self")
        ln(f"dec.{i}.cross.ln")
        attn(f"dec.{i}.cross")
        ln(f"dec.{i}.mlp.ln")
        mlp(f"dec.{i}.mlp")
    ln("dec.ln")
    return spec


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: dict[str, Tensor]
    vocab: Vocabulary | None = None
    name: str = "toy"
    enc_pos: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.enc_pos = sinusoidal_embeddings(
            self.config.max_audio_frames, self.config.d_model
        )

    def n_parameters(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None


def init_params(
    cfg: ModelConfig, seed: int, vocab: Vocabulary | None = None, name: str = "toy"
) -> ModelParams:
    """Seeded init: normal(0, 0.02) weights, zero biases, unit LN gains."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for pname, shape, kind in _param_spec(cfg):
        if kind == "normal":
            data = rng.normal(0.0, 0.02, size=shape)
        elif kind == "ones":
            data = np.ones(shape)
        else:
            data = np.zeros(shape)
        tensors[pname] = Tensor(data, requires_grad=True)
    return ModelParams(config=cfg, tensors=tensors, vocab=vocab, name=name)


def _linear(x: Tensor, p: dict, prefix: str) -> Tensor:
    return x @ p[f"{prefix}.w"] + p[f"{prefix}.b"]


def _attention(
    x_q: Tensor,
    x_kv: Tensor,
    p: dict,
    prefix: str,
    cfg: ModelConfig,
    mask: np.ndarray | None,
    rng,
    training: bool,
) -> Tensor:
    b, tq = x_q.shape[0], x_q.shape[1]
    tk = x_kv.shape[1]
    h, hd = cfg.n_heads, cfg.head_dim

    def heads(t: Tensor, tlen: int) -> Tensor:
        return t.reshape(b, tlen, h, hd).transpose(0, 2, 1, 3)

    q = heads(_linear(x_q, p, f"{prefix}.q"), tq)
    k = heads(_linear(x_kv, p, f"{prefix}.k"), tk)
    v = heads(_linear(x_kv, p, f"{prefix}.v"), tk)
    scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(hd))
    if mask is not None:
        scores = scores + Tensor(mask)
    probs = ad.softmax(scores, axis=-1)
    probs = ad.dropout(probs, cfg.attn_dropout, rng, training)
    ctx = (probs @ v).transpose(0, 2, 1, 3).reshape(b, tq, cfg.d_model)
    return _linear(ctx, p, f"{prefix}.o")


def _mlp(x: Tensor, p: dict, prefix: str, cfg: ModelConfig, rng, training: bool) -> Tensor:
    h = ad.gelu(_linear(x, p, f"{prefix}.fc"))
    h = ad.dropout(h, cfg.mlp_dropout, rng, training)
    return _linear(h, p, f"{prefix}.proj")


def _ln(x: Tensor, p: dict, prefix: str) -> Tensor:
    return ad.layer_norm(x, p[f"{prefix}.g"], p[f"{prefix}.b"])


def encode_audio(params: ModelParams, mels: np.ndarray, rng=None, training: bool = False) -> Tensor:
    """Conv stem + encoder stack. mels: (B, T, n_mels) -> (B, floor(T/2), d)."""
    cfg = params.config
    p = params.tensors
    if mels.ndim != 3 or mels.shape[2] != cfg.n_mels:
        raise ShapeError(f"expected (B, T, {cfg.n_mels}) mel input, got {mels.shape}")
    if rng is None:
        rng = np.random.default_rng(0)
    scaled = (mels + MEL_INPUT_OFFSET) / MEL_INPUT_SCALE
    x = Tensor(np.ascontiguousarray(scaled.transpose(0, 2, 1)))
    x = ad.gelu(ad.conv1d(x, p["conv1.w"], p["conv1.b"], stride=1, padding=(1, 1)))
    # (0,1) padding with stride 2 gives floor(T/2) output frames for every T
    x = ad.gelu(ad.conv1d(x, p["conv2.w"], p["conv2.b"], stride=2, padding=(0, 1)))
    x = x.transpose(0, 2, 1)
    t_out = x.shape[1]
    if t_out > cfg.max_audio_frames:
        raise ShapeError(
            f"{t_out} encoder frames exceed max_audio_frames {cfg.max_audio_frames}"
        )
    x = x + Tensor(params.enc_pos[:t_out])
    for i in range(cfg.n_layers):
        h = _ln(x, p, f"enc.{i}.attn.ln")
        x = x + _attention(h, h, p, f"enc.{i}.attn", cfg, None, rng, training)
        x = x + _mlp(_ln(x, p, f"enc.{i}.mlp.ln"), p, f"enc.{i}.mlp", cfg, rng, training)
    return _ln(x, p, "enc.ln")


def _causal_mask(s: int) -> np.ndarray:
    return np.triu(np.full((1, 1, s, s), NEG_INF), k=1)


def decode_text(
    params: ModelParams,
    enc_out: Tensor,
    tokens: np.ndarray,
    rng=None,
    training: bool = False,
) -> Tensor:
    """Decoder stack over token prefix; returns logits (B, S, vocab)."""
    cfg = params.config
    p = params.tensors
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 2:
        raise ShapeError(f"tokens must be (B, S), got shape {tokens.shape}")
    s = tokens.shape[1]
    if s > cfg.max_text_tokens:
        raise ShapeError(f"{s} tokens exceed max_text_tokens {cfg.max_text_tokens}")
    if tokens.size and tokens.max() >= cfg.vocab_size:
        raise ShapeError("token id outside vocabulary")
    if rng is None:
        rng = np.random.default_rng(0)
    x = ad.embedding(p["tok_emb"], tokens) + p["dec_pos"][:s]
    mask = _causal_mask(s)
    for i in range(cfg.n_layers):
        h = _ln(x, p, f"dec.{i}.self.ln")
        x = x + _attention(h, h, p, f"dec.{i}.self", cfg, mask, rng, training)
        x = x + _attention(
            _ln(x, p, f"dec.{i}.cross.ln"), enc_out,
            p, f"dec.{i}.cross", cfg, None, rng, training,
        )
        x = x + _mlp(_ln(x, p, f"dec.{i}.mlp.ln"), p, f"dec.{i}.mlp", cfg, rng, training)
    x = _ln(x, p, "dec.ln")
    return x @ p["tok_emb"].transpose(1, 0)


def forward_batch(
    params: ModelParams,
    mels: np.ndarray,
    tokens: np.ndarray,
    mode: str = "eval",
    rng_seed: int = 0,
) -> Tensor:
    """Full pass over a batch: (B, T, n_mels) mels + (B, S) tokens -> logits."""
    training = mode == "train"
    rng = np.random.default_rng(rng_seed)
    enc = encode_audio(params, mels, rng, training)
    return decode_text(params, enc, tokens, rng, training)


def forward(
    params: ModelParams,
    mel: LogMelSpectrogram,
    tokens,
    mode: str = "eval",
    rng_seed: int = 0,
) -> Tensor:
    """Single-utterance pass; returns logits (len(tokens), vocab_size)."""
    logits = forward_batch(
        params,
        mel.values[None],
        np.asarray(tokens, dtype=np.int64)[None],
        mode=mode,
        rng_seed=rng_seed,
    )
    return logits.reshape(logits.shape[1], logits.shape[2])


def cross_entropy_loss(logits: Tensor, targets: np.ndarray, pad_mask: np.ndarray) -> Tensor:
    """Mean negative log-likelihood over positions where pad_mask is 1."""
    targets = np.asarray(targets, dtype=np.int64)
    mask = np.asarray(pad_mask, dtype=np.float64)
    if logits.shape[:-1] != targets.shape or targets.shape != mask.shape:
        raise ShapeError(
            f"logits {logits.shape}, targets {targets.shape}, mask {mask.shape} disagree"
        )
    n_active = mask.sum()
    if n_active == 0:
        raise EmptyLoss("every target position is padded out")
    lsm = ad.log_softmax(logits, axis=-1)
    picked = ad.take_along_last(lsm, targets)
    return -((picked * Tensor(mask)).sum() / n_active)


def pad_mel_batch(mel_list: list[np.ndarray], n_frames: int) -> np.ndarray:
    """Stack per-utterance mels, padding with the log floor to n_frames."""
    out = np.full((len(mel_list), n_frames, mel_list[0].shape[1]), LOG_FLOOR)
    for i, m in enumerate(mel_list):
        t = min(len(m), n_frames)
        out[i, :t] = m[:t]
    return out


def greedy_decode_batch(
    params: ModelParams, mels: np.ndarray, max_len: int
) -> list[list[int]]:
    """Lock-step greedy decoding for a batch of mel inputs."""
    cfg = params.config
    if max_len > cfg.max_text_tokens:
        raise ShapeError(f"max_len {max_len} exceeds max_text_tokens")
    b = mels.shape[0]
    with ad.no_grad():
        enc = encode_audio(params, mels)
        seqs = np.full((b, 1), SOS_ID, dtype=np.int64)
        done = np.zeros(b, dtype=bool)
        while seqs.shape[1] < max_len and not done.all():
            logits = decode_text(params, enc, seqs)
            nxt = np.argmax(logits.data[:, -1, :], axis=-1)
            nxt = np.where(done, EOS_ID, nxt)
            seqs = np.concatenate([seqs, nxt[:, None]], axis=1)
            done |= nxt == EOS_ID
    out = []
    for row in seqs:
        ids = list(int(t) for t in row)
        if EOS_ID in ids[1:]:
            ids = ids[: ids[1:].index(EOS_ID) + 2]
        out.append(ids)
    return out


def greedy_decode(params: ModelParams, mel: LogMelSpectrogram, max_len: int) -> list[int]:
    """SOS-initialized token-by-token argmax decode for one utterance."""
    return greedy_decode_batch(params, mel.values[None], max_len)[0]


def save_checkpoint(params: ModelParams, path) -> None:
    """Atomic write: arrays plus a JSON metadata blob, bit-exact round trip."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": params.config.to_json(),
        "name": params.name,
        "vocab": vocab_to_json(params.vocab) if params.vocab is not None else None,
    }
    arrays = {name: t.data for name, t in params.tensors.items()}
    arrays["__meta__"] = np.frombuffer(
        json.dumps(meta, ensure_ascii=False).encode("utf-8"), dtype=np.uint8
    )
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as f:
        np.savez(f, **arrays)
    os.replace(tmp, path)


def load_checkpoint(path) -> ModelParams:
    with np.load(path) as z:
        meta = json.loads(bytes(z["__meta__"]).decode("utf-8"))
        tensors = {
            name: Tensor(z[name], requires_grad=True)
            for name in z.files
            if name != "__meta__"
        }
    cfg = ModelConfig.from_json(meta["config"])
    vocab = vocab_from_json(meta["vocab"]) if meta.get("vocab") else None
    return ModelParams(config=cfg, tensors=tensors, vocab=vocab, name=meta.get("name", "toy"))

"""Training loop with teacher forcing, per-epoch greedy validation WER,
early stopping on validation loss, and checkpoint selection by WER.

Optimizers: adam, adamw (decoupled decay applied before the adam delta),
adam_hf (epsilon inside the denominator square root), adagrad. Schedulers:
linear, linear_warmup, cosine, reduce_on_plateau.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import audio as dsp
from . import model as mdl
from .data import Dataset
from .errors import EmptySplit, InvalidSchedule, NonFiniteGrad, ShapeError
from .metrics import build_report
from .model import ModelConfig, ModelParams, cross_entropy_loss, forward_batch
from .script import PAD_ID, Vocabulary, build_vocab, decode, encode, slp1_to_deva

OPTIMIZERS = ("adam", "adamw", "adam_hf", "adagrad")
SCHEDULERS = ("linear", "linear_warmup", "cosine", "reduce_on_plateau")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
PLATEAU_FACTOR = 0.5
LR_FLOOR = 1e-7
IMPROVE_ATOL = 1e-6


@dataclass
class HyperParams:
    mlp_dropout: float = 0.1
    attn_dropout: float = 0.1
    learning_rate: float = 1e-3
    optimizer: str = "adamw"
    scheduler: str = "linear_warmup"
    weight_decay: float = 0.01
    batch_size: int = 8
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "HyperParams":
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_wer: float
    lr: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def append(self, rec: EpochRecord) -> None:
        if self.records and rec.epoch <= self.records[-1].epoch:
            raise ValueError("epochs must be strictly increasing")
        self.records.append(rec)

    def val_losses(self) -> list[float]:
        return [r.val_loss for r in self.records]

    def best_val_wer(self) -> float:
        return min(r.val_wer for r in self.records)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for r in self.records:
                f.write(json.dumps(dataclasses.asdict(r)) + "\n")

    @classmethod
    def load(cls, path) -> "TrainHistory":
        hist = cls()
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    hist.append(EpochRecord(**json.loads(line)))
        return hist

    def __len__(self) -> int:
        return len(self.records)


def optimizer_step(
    state: dict,
    params: ModelParams,
    grads: dict[str, np.ndarray],
    hp: HyperParams,
    step: int,
    lr: float | None = None,
    eps: float = ADAM_EPS,
    skip: frozenset = frozenset(),
) -> None:
    """Apply one update in place. `step` is 1-based for bias correction."""
    if step < 1:
        raise ValueError("step must be >= 1")
    if lr is None:
        lr = hp.learning_rate
    kind = hp.optimizer
    for name, g in grads.items():
        if name in skip:
            continue
        if not np.all(np.isfinite(g)):
            raise NonFiniteGrad(f"non-finite gradient in {name!r} at step {step}")
        w = params.tensors[name].data
        if kind == "adagrad":
            st = state.setdefault(name, {"G": np.zeros_like(w)})
            st["G"] += g * g
            w -= lr * g / (np.sqrt(st["G"]) + eps)
            continue
        st = state.setdefault(name, {"m": np.zeros_like(w), "v": np.zeros_like(w)})
        if kind == "adamw":
            w -= lr * hp.weight_decay * w
        st["m"] = ADAM_BETA1 * st["m"] + (1 - ADAM_BETA1) * g
        st["v"] = ADAM_BETA2 * st["v"] + (1 - ADAM_BETA2) * (g * g)
        m_hat = st["m"] / (1 - ADAM_BETA1**step)
        v_hat = st["v"] / (1 - ADAM_BETA2**step)
        if kind == "adam_hf":
            w -= lr * m_hat / np.sqrt(v_hat + eps)
        else:
            w -= lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass
class PlateauState:
    """Per-run state for the reduce_on_plateau schedule."""

    lr: float
    patience: int
    best: float = math.inf
    stale: int = 0

    def update(self, val_loss: float) -> None:
        if val_loss < self.best - IMPROVE_ATOL:
            self.best = val_loss
            self.stale = 0
        else:
            self.stale += 1
            if self.stale >= self.patience:
                self.lr = max(self.lr * PLATEAU_FACTOR, LR_FLOOR)
                self.stale = 0


def lr_schedule(
    kind: str,
    base_lr: float,
    step: int,
    total_steps: int,
    warmup_steps: int = 0,
    plateau_state: PlateauState | None = None,
) -> float:
    if kind == "reduce_on_plateau":
        if plateau_state is None:
            raise InvalidSchedule("reduce_on_plateau requires plateau_state")
        return plateau_state.lr
    if total_steps <= 0:
        raise InvalidSchedule("total_steps must be positive")
    if not 0 <= step <= total_steps:
        raise InvalidSchedule(f"step {step} outside [0, {total_steps}]")
    if kind == "linear":
        return base_lr * (1 - step / total_steps)
    if kind == "linear_warmup":
        if warmup_steps > 0 and step < warmup_steps:
            return base_lr * step / warmup_steps
        rest = total_steps - warmup_steps
        if rest <= 0:
            return base_lr if step < total_steps else 0.0
        return base_lr * (1 - (step - warmup_steps) / rest)
    if kind == "cosine":
        return base_lr * 0.5 * (1 + math.cos(math.pi * step / total_steps))
    raise InvalidSchedule(f"unknown scheduler kind {kind!r}")


def early_stop(history: TrainHistory, patience: int) -> bool:
    """True iff val loss has not improved by > 1e-6 for `patience` epochs."""
    losses = history.val_losses() if isinstance(history, TrainHistory) else list(history)
    if not losses:
        raise ValueError("history must be nonempty")
    best = losses[0]
    streak = 0
    for loss in losses[1:]:
        if loss < best - IMPROVE_ATOL:
            best = loss
            streak = 0
        else:
            streak += 1
    return streak >= patience


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total

def grad_check(
    cfg: ModelConfig,
    batch: tuple[np.ndarray, np.ndarray],
    eps: float = 1e-5,
    n_coords: int = 200,
    seed: int = 0,
    grad_scale: dict[str, float] | None = None,
) -> float:
    """Max relative error between tape gradients and central differences.

    Samples >= n_coords coordinates per parameter tensor (all of them for
    smaller tensors). Relative error uses max(|numeric|, 1e-4) in the
    denominator so finite-difference noise near zero cannot dominate.
    grad_scale deliberately corrupts named analytic gradients so the check
    can be shown to catch a wrong backward pass.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    mels, tokens = batch
    tokens = np.asarray(tokens, dtype=np.int64)
    inputs, targets = tokens[:, :-1], tokens[:, 1:]
    mask = (targets != PAD_ID).astype(np.float64)
    params = mdl.init_params(cfg, seed)

    def loss_value() -> float:
        from .autodiff import no_grad

        with no_grad():
            logits = forward_batch(params, mels, inputs, mode="eval")
            return float(cross_entropy_loss(logits, targets, mask).data)

    params.zero_grad()
    loss = cross_entropy_loss(
        forward_batch(params, mels, inputs, mode="eval"), targets, mask
    )
    loss.backward()
    for name, factor in (grad_scale or {}).items():
        params.tensors[name].grad *= factor

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in sorted(params.tensors):
        t = params.tensors[name]
        flat = t.data.reshape(-1)
        gflat = t.grad.reshape(-1)
        size = flat.size
        if size <= n_coords:
            coords = np.arange(size)
        else:
            coords = rng.choice(size, size=n_coords, replace=False)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + eps
            lp = loss_value()
            flat[c] = orig - eps
            lm = loss_value()
            flat[c] = orig
            numeric = (lp - lm) / (2 * eps)
            rel = abs(gflat[c] - numeric) / max(abs(numeric), 1e-4)
            if rel > worst:
                worst = rel
    return worst


def _token_batch(seqs: list[list[int]], max_text: int) -> np.ndarray:
    width = min(max(len(s) for s in seqs), max_text)
    out = np.full((len(seqs), width), PAD_ID, dtype=np.int64)
    for i, s in enumerate(seqs):
        s = s[:width]
        out[i, : len(s)] = s
    return out


def _load_split_arrays(ds: Dataset, split: str, vocab: Vocabulary, cfg: ModelConfig):
    """Mels padded to the full audio context plus encoded token sequences."""
    entries = ds.split(split)
    if not entries:
        raise EmptySplit(f"split {split!r} is empty")
    n_frames = 2 * cfg.max_audio_frames
    ctx_seconds = n_frames / 100.0
    mels = []
    token_seqs = []
    for e in entries:
        buf = dsp.read_wav(ds.resolve(e))
        if buf.sample_rate_hz != dsp.SAMPLE_RATE:
            buf = dsp.resample(buf, dsp.SAMPLE_RATE)
        # same peak normalization the transcription path applies
        buf = dsp.pad_or_trim(dsp.normalize(buf), ctx_seconds)
        mels.append(dsp.log_mel(buf).values)
        ids, _ = encode(e.slp1, vocab)
        if len(ids) > cfg.max_text_tokens:
            raise ShapeError(
                f"transcript of {len(ids)} tokens exceeds max_text_tokens"
            )
        token_seqs.append(ids)
    refs_deva = [e.devanagari for e in entries]
    refs_slp1 = [e.slp1 for e in entries]
    return np.stack(mels), token_seqs, refs_deva, refs_slp1


def _val_metrics(params: ModelParams, mels, token_seqs, refs_deva, refs_slp1, batch_size):
    """Eval-mode loss plus greedy-decode WER over one split."""
    vocab = params.vocab
    total_loss = 0.0
    total_tokens = 0.0
    hyps_slp1 = []
    max_len = min(params.config.max_text_tokens, max(len(s) for s in token_seqs) + 8)
    for i in range(0, len(token_seqs), batch_size):
        mel_b = mels[i : i + batch_size]
        tok_b = _token_batch(token_seqs[i : i + batch_size], params.config.max_text_tokens)
        inputs, targets = tok_b[:, :-1], tok_b[:, 1:]
        mask = (targets != PAD_ID).astype(np.float64)
        from .autodiff import no_grad

        with no_grad():
            logits = forward_batch(params, mel_b, inputs, mode="eval")
            loss = cross_entropy_loss(logits, targets, mask)
        n = float(mask.sum())
        total_loss += float(loss.data) * n
        total_tokens += n
        for ids in mdl.greedy_decode_batch(params, mel_b, max_len):
            hyps_slp1.append(decode(ids, vocab))
    hyps_deva = [slp1_to_deva(h) for h in hyps_slp1]
    report = build_report("val", refs_deva, hyps_deva, refs_slp1, hyps_slp1)
    return total_loss / total_tokens, report.wer


def train(
    cfg: ModelConfig,
    ds: Dataset,
    hp: HyperParams,
    clip_norm: float = 1.0,
    warmup_fraction: float = 0.1,
    freeze_encoder: bool = False,
    name: str = "toy",
    on_epoch=None,
) -> tuple[ModelParams, TrainHistory]:
    """Teacher-forced training; returns the checkpoint with lowest val WER."""
    vocab = ds.vocab or build_vocab([e.slp1 for e in ds.split("train")])
    cfg = replace(
        cfg,
        vocab_size=len(vocab),
        mlp_dropout=hp.mlp_dropout,
        attn_dropout=hp.attn_dropout,
    )
    train_mels, train_tokens, _, _ = _load_split_arrays(ds, "train", vocab, cfg)
    val_arrays = _load_split_arrays(ds, "val", vocab, cfg)

    params = mdl.init_params(cfg, hp.seed, vocab=vocab, name=name)
    n_train = len(train_tokens)
    steps_per_epoch = math.ceil(n_train / hp.batch_size)
    total_steps = steps_per_epoch * hp.max_epochs
    warmup_steps = round(warmup_fraction * total_steps)
    plateau = PlateauState(lr=hp.learning_rate, patience=hp.patience)
    opt_state: dict = {}
    skip = frozenset(
        n for n in params.tensors if freeze_encoder and (n.startswith("enc") or n.startswith("conv"))
    )

    history = TrainHistory()
    shuffle_rng = np.random.default_rng([hp.seed, 1])
    best_wer = math.inf
    best_tensors = None
    step = 0
    for epoch in range(1, hp.max_epochs + 1):
        order = shuffle_rng.permutation(n_train)
        epoch_loss = 0.0
        epoch_tokens = 0.0
        for i in range(0, n_train, hp.batch_size):
            idx = order[i : i + hp.batch_size]
            mel_b = train_mels[idx]
            tok_b = _token_batch([train_tokens[j] for j in idx], cfg.max_text_tokens)
            inputs, targets = tok_b[:, :-1], tok_b[:, 1:]
            mask = (targets != PAD_ID).astype(np.float64)
            params.zero_grad()
            logits = forward_batch(
                params, mel_b, inputs, mode="train", rng_seed=hp.seed * 100003 + step
            )
            loss = cross_entropy_loss(logits, targets, mask)
            if not np.isfinite(loss.data):
                raise NonFiniteGrad(f"non-finite training loss at step {step}")
            loss.backward()
            grads = {n: t.grad for n, t in params.tensors.items() if t.grad is not None}
            clip_gradients(grads, clip_norm)
            lr = lr_schedule(
                hp.scheduler, hp.learning_rate, step, total_steps, warmup_steps, plateau
            )
            step += 1
            optimizer_step(opt_state, params, grads, hp, step, lr=lr, skip=skip)
            n = float(mask.sum())
            epoch_loss += float(loss.data) * n
            epoch_tokens += n

        val_loss, val_wer = _val_metrics(params, *val_arrays, hp.batch_size)
        plateau.update(val_loss)
        rec = EpochRecord(
            epoch=epoch,
            train_loss=epoch_loss / epoch_tokens,
            val_loss=val_loss,
            val_wer=val_wer,
            lr=lr,
        )
        history.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
        if val_wer < best_wer:
            best_wer = val_wer
            best_tensors = {n: t.data.copy() for n, t in params.tensors.items()}
        if early_stop(history, hp.patience):
            break

    if best_tensors is not None:
        for n, data in best_tensors.items():
            params.tensors[n].data = data
    return params, history

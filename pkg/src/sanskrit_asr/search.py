"""Randomized hyperparameter search with append-only JSONL trial logging.

Dropouts are sampled uniformly, learning rate log-uniformly within the
size-class interval, optimizer and scheduler uniformly from their sets.
Each trial is a full training run scored by its best validation WER.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset, load_manifest
from .errors import NonFiniteGrad, NoViableTrial
from .model import ModelConfig
from .training import OPTIMIZERS, SCHEDULERS, HyperParams, train

# lr intervals by model size class
LR_RANGES = {
    "small": (1e-5, 3e-5),
    "medium": (5e-5, 8e-5),
}

TRIALS_LOG = "trials.jsonl"
BEST_FILE = "best.json"


@dataclass(frozen=True)
class SearchSpace:
    mlp_dropout: tuple[float, float] = (0.2, 0.6)
    attn_dropout: tuple[float, float] = (0.2, 0.6)
    learning_rate: tuple[float, float] = LR_RANGES["small"]
    optimizers: tuple[str, ...] = OPTIMIZERS
    schedulers: tuple[str, ...] = SCHEDULERS

    def __post_init__(self):
        for name in ("mlp_dropout", "attn_dropout", "learning_rate"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name} interval is empty: ({lo}, {hi})")
        if not self.optimizers or not self.schedulers:
            raise ValueError("optimizer and scheduler sets must be nonempty")

    @classmethod
    def for_size(cls, size_class: str, **kwargs) -> "SearchSpace":
        if size_class not in LR_RANGES:
            raise ValueError(f"unknown size class {size_class!r}")
        return cls(learning_rate=LR_RANGES[size_class], **kwargs)


def sample(space: SearchSpace, rng_seed: int, trial_id: int, base: HyperParams | None = None) -> HyperParams:
    """Deterministic draw for one trial; fixed draw order keeps logs stable."""
    rng = np.random.default_rng([rng_seed, trial_id])
    mlp = float(rng.uniform(*space.mlp_dropout))
    attn = float(rng.uniform(*space.attn_dropout))
    lo, hi = space.learning_rate
    lr = float(np.exp(rng.uniform(math.log(lo), math.log(hi))))
    opt = space.optimizers[int(rng.integers(len(space.optimizers)))]
    sched = space.schedulers[int(rng.integers(len(space.schedulers)))]
    if base is None:
        base = HyperParams()
    return dataclasses.replace(
        base,
        mlp_dropout=mlp,
        attn_dropout=attn,
        learning_rate=lr,
        optimizer=opt,
        scheduler=sched,
        seed=trial_id,
    )


@dataclass
class TrialRecord:
    trial_id: int
    hp: HyperParams
    best_val_wer: float
    best_val_loss: float
    epochs_run: int
    wall_time_s: float
    status: str  # ok | diverged | failed

    def to_json(self) -> dict:
        def num(x):
            return x if math.isfinite(x) else None

        return {
            "trial_id": self.trial_id,
            "hp": self.hp.to_json(),
            "best_val_wer": num(self.best_val_wer),
            "best_val_loss": num(self.best_val_loss),
            "epochs_run": self.epochs_run,
            "wall_time_s": self.wall_time_s,
            "status": self.status,
        }

    @classmethod
    def from_json(cls, d: dict) -> "TrialRecord":
        def num(x):
            return math.inf if x is None else float(x)

        return cls(
            trial_id=int(d["trial_id"]),
            hp=HyperParams.from_json(d["hp"]),
            best_val_wer=num(d["best_val_wer"]),
            best_val_loss=num(d["best_val_loss"]),
            epochs_run=int(d["epochs_run"]),
            wall_time_s=float(d["wall_time_s"]),
            status=d["status"],
        )


def _run_trial(args) -> TrialRecord:
    (trial_id, space, rng_seed, cfg, manifest_path, budget, base_hp, hp_override) = args
    hp = sample(space, rng_seed, trial_id, base=base_hp)
    if budget is not None:
        hp = dataclasses.replace(hp, max_epochs=int(budget))
    if hp_override is not None:
        hp = hp_override(trial_id, hp)
    ds = load_manifest(manifest_path)
    t0 = time.monotonic()
    try:
        _, history = train(cfg, ds, hp)
        wall = time.monotonic() - t0
        wers = [r.val_wer for r in history.records]
        losses = [r.val_loss for r in history.records]
        return TrialRecord(
            trial_id=trial_id,
            hp=hp,
            best_val_wer=min(wers),
            best_val_loss=min(losses),
            epochs_run=len(history),
            wall_time_s=wall,
            status="ok",
        )
    except NonFiniteGrad:
        return TrialRecord(
            trial_id=trial_id,
            hp=hp,
            best_val_wer=math.inf,
            best_val_loss=math.inf,
            epochs_run=0,
            wall_time_s=time.monotonic() - t0,
            status="diverged",
        )
    except Exception:
        return TrialRecord(
            trial_id=trial_id,
            hp=hp,
            best_val_wer=math.inf,
            best_val_loss=math.inf,
            epochs_run=0,
            wall_time_s=time.monotonic() - t0,
            status="failed",
        )


def load_trials(log_path) -> list[TrialRecord]:
    records = []
    path = Path(log_path)
    if not path.is_file():
        return records
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(TrialRecord.from_json(json.loads(line)))
    return records


def _append(log_path, rec: TrialRecord) -> None:
    with open(log_path, "a", encoding="utf-8") as f:
        f.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")
        f.flush()


def run_search(
    space: SearchSpace,
    n_trials: int,
    cfg: ModelConfig,
    ds: Dataset,
    budget_per_trial: int | None = None,
    out_dir=".",
    rng_seed: int = 0,
    base_hp: HyperParams | None = None,
    workers: int = 1,
    hp_override=None,
) -> tuple[TrialRecord, list[TrialRecord]]:
    """Run (or resume) a search; returns (best ok trial, full sorted log).

    Completed trial_ids found in an existing trials.jsonl are skipped, so an
    interrupted search resumes where it stopped. hp_override(trial_id, hp)
    is a test hook applied after sampling.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / TRIALS_LOG
    if ds.root is None:
        raise ValueError("dataset must be manifest-backed for search")
    manifest_path = ds.root / "manifest.jsonl"

    done = {r.trial_id for r in load_trials(log_path)}
    todo = [t for t in range(n_trials) if t not in done]
    jobs = [
        (t, space, rng_seed, cfg, manifest_path, budget_per_trial, base_hp, hp_override)
        for t in todo
    ]
    if workers <= 1:
        for job in jobs:
            _append(log_path, _run_trial(job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_trial, job) for job in jobs]
            for fut in as_completed(futures):
                _append(log_path, fut.result())
        records = sorted(load_trials(log_path), key=lambda r: r.trial_id)
        with open(log_path, "w", encoding="utf-8") as f:
            for rec in records:
                f.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")

    records = sorted(load_trials(log_path), key=lambda r: r.trial_id)
    ok = [r for r in records if r.status == "ok"]
    if not ok:
        raise NoViableTrial("every trial diverged or failed")
    best = min(ok, key=lambda r: r.best_val_wer)
    with open(out_dir / BEST_FILE, "w", encoding="utf-8") as f:
        json.dump(best.to_json(), f, indent=2)
    return best, records

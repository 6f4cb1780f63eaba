"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
A single optional JSON config file can hold model overrides, hyperparams,
an augmentation policy, and the manifest path; explicit flags win.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import audio as dsp
from .augment import AugmentPolicy, augment_subset
from .data import gen_synthetic_corpus, load_manifest, save_manifest
from .errors import SanskritAsrError
from .metrics import evaluate
from .model import ModelConfig, count_parameters, load_checkpoint, presets, save_checkpoint
from .pipeline import transcribe_file
from .search import SearchSpace, run_search
from .service import DEFAULT_MAX_BODY_BYTES, serve
from .training import HyperParams, TrainHistory, grad_check, train

GRAD_CHECK_TOL = 1e-4


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, leaving 2 and 3 for data/numeric failures
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _resolve_hp(config: dict, args) -> HyperParams:
    fields = {f.name for f in dataclasses.fields(HyperParams)}
    merged = {k: v for k, v in config.get("hp", {}).items() if k in fields}
    if args.seed is not None:
        merged["seed"] = args.seed
    return HyperParams(**merged)


def _resolve_model(config: dict, preset_name: str) -> ModelConfig:
    cfg = presets()[preset_name]
    overrides = config.get("model", {}).get("overrides", {})
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def _manifest_path(config: dict, args) -> Path:
    path = getattr(args, "manifest", None) or config.get("manifest")
    if path is None:
        raise SanskritAsrError("no manifest given (flag --manifest or config)")
    return Path(path)


def _cmd_synth(args, config):
    out = Path(args.output_dir)
    ds = gen_synthetic_corpus(
        seed=args.seed if args.seed is not None else 42,
        n_utterances=args.n,
        out_dir=out,
        n_ood=args.ood,
    )
    sizes = {s: len(ds.split(s)) for s in ("train", "val", "test", "ood")}
    print(f"wrote {len(ds)} utterances to {out} splits={sizes}")
    return 0


def _cmd_preprocess(args, config):
    ds = load_manifest(_manifest_path(config, args))
    total_s = 0.0
    frames = 0
    for e in ds.entries:
        buf = dsp.read_wav(ds.resolve(e))
        if buf.sample_rate_hz != dsp.SAMPLE_RATE:
            buf = dsp.resample(buf, dsp.SAMPLE_RATE)
        mel = dsp.log_mel(buf)
        frames += mel.values.shape[0]
        total_s += buf.duration_s
    print(
        f"{len(ds)} utterances ok: {total_s:.1f}s audio, {frames} mel frames, "
        f"vocab={'present' if ds.vocab else 'absent'}"
    )
    return 0


def _cmd_augment(args, config):
    manifest = _manifest_path(config, args)
    ds = load_manifest(manifest)
    policy = AugmentPolicy.from_json(config.get("augment", {}))
    seed = args.seed if args.seed is not None else 0
    out = augment_subset(ds, args.fraction, seed, policy)
    target = Path(args.output_dir) / "manifest.jsonl" if args.output_dir != "." else manifest.with_suffix(".aug.jsonl")
    save_manifest(out, target)
    n_new = len(out) - len(ds)
    print(f"augmented {n_new} train files; manifest -> {target}")
    return 0


def _cmd_train(args, config):
    ds = load_manifest(_manifest_path(config, args))
    cfg = _resolve_model(config, args.preset)
    hp = _resolve_hp(config, args)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    def show(rec):
        print(
            f"epoch {rec.epoch:3d} train_loss {rec.train_loss:.4f} "
            f"val_loss {rec.val_loss:.4f} val_wer {rec.val_wer:.4f} lr {rec.lr:.2e}"
        )

    params, history = train(cfg, ds, hp, name=args.preset, on_epoch=show)
    ckpt = out / "checkpoint.npz"
    save_checkpoint(params, ckpt)
    history.save(out / "history.jsonl")
    print(f"best val WER {history.best_val_wer():.4f}; checkpoint -> {ckpt}")
    return 0


def _cmd_evaluate(args, config):
    params = load_checkpoint(args.checkpoint)
    ds = load_manifest(_manifest_path(config, args))
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    print(f"model {params.name} ({params.n_parameters():,} parameters)")
    for split in args.splits.split(","):
        split = split.strip()
        report = evaluate(params, ds, split)
        report.save(out / f"report-{split}.json")
        print(f"  {split:5s} WER {report.wer * 100:6.2f}%  CER {report.cer * 100:6.2f}%")
    return 0


def _cmd_search(args, config):
    ds = load_manifest(_manifest_path(config, args))
    cfg = _resolve_model(config, args.preset)
    space = SearchSpace.for_size(args.size_class) if args.size_class else SearchSpace()
    base = _resolve_hp(config, args)
    best, records = run_search(
        space,
        args.trials,
        cfg,
        ds,
        budget_per_trial=args.budget_epochs,
        out_dir=args.output_dir,
        rng_seed=args.seed if args.seed is not None else 0,
        base_hp=base,
        workers=args.workers,
    )
    print(
        f"{len(records)} trials; best trial {best.trial_id} "
        f"val WER {best.best_val_wer:.4f} ({best.hp.optimizer}/{best.hp.scheduler})"
    )
    return 0


def _cmd_transcribe(args, config):
    params = load_checkpoint(args.checkpoint)
    result = transcribe_file(args.audio, params)
    print(json.dumps(result.to_json(), ensure_ascii=False, indent=2))
    return 0


def _cmd_serve(args, config):
    serve(
        args.checkpoint,
        host=args.host,
        port=args.port,
        max_body_bytes=args.max_body_bytes,
    )
    return 0


def _cmd_gradcheck(args, config):
    cfg = _resolve_model(config, args.preset)
    cfg = dataclasses.replace(cfg, vocab_size=16, max_text_tokens=8, max_audio_frames=8)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    mels = rng.normal(-5.0, 4.0, size=(1, 16, cfg.n_mels))
    tokens = np.concatenate(
        [[1], rng.integers(4, cfg.vocab_size, size=5), [2]]
    )[None, :]
    err = grad_check(cfg, (mels, tokens), eps=args.eps, n_coords=args.coords)
    print(f"max relative error {err:.3e} (tolerance {GRAD_CHECK_TOL:.0e})")
    if err >= GRAD_CHECK_TOL:
        print("gradient check FAILED", file=sys.stderr)
        return 3
    return 0


def _cmd_params(args, config):
    for name, cfg in presets().items():
        print(f"{name:7s} layers={cfg.n_layers:3d} d={cfg.d_model:5d} "
              f"heads={cfg.n_heads:3d} params={count_parameters(cfg):,}")
    return 0


def build_parser() -> _Parser:
    p = _Parser(prog="sanskrit-asr", description="Sanskrit speech recognition toolkit")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, default=None, help="global RNG seed")
    p.add_argument("--output-dir", default=".", help="directory for outputs")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate the synthetic corpus")
    sp.add_argument("--n", type=int, default=400)
    sp.add_argument("--ood", type=int, default=None)
    sp.set_defaults(fn=_cmd_synth)

    sp = sub.add_parser("preprocess", help="validate audio and mel geometry")
    sp.add_argument("--manifest")
    sp.set_defaults(fn=_cmd_preprocess)

    sp = sub.add_parser("augment", help="augment a fraction of train files")
    sp.add_argument("--manifest")
    sp.add_argument("--fraction", type=float, default=0.3)
    sp.set_defaults(fn=_cmd_augment)

    sp = sub.add_parser("train", help="train a model")
    sp.add_argument("--manifest")
    sp.add_argument("--preset", default="toy", choices=sorted(presets()))
    sp.set_defaults(fn=_cmd_train)

    sp = sub.add_parser("evaluate", help="score a checkpoint on splits")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--manifest")
    sp.add_argument("--splits", default="test")
    sp.set_defaults(fn=_cmd_evaluate)

    sp = sub.add_parser("search", help="randomized hyperparameter search")
    sp.add_argument("--manifest")
    sp.add_argument("--preset", default="toy", choices=sorted(presets()))
    sp.add_argument("--trials", type=int, default=12)
    sp.add_argument("--budget-epochs", type=int, default=None)
    sp.add_argument("--size-class", choices=("small", "medium"), default=None)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(fn=_cmd_search)

    sp = sub.add_parser("transcribe", help="transcribe one audio file")
    sp.add_argument("audio")
    sp.add_argument("--checkpoint", required=True)
    sp.set_defaults(fn=_cmd_transcribe)

    sp = sub.add_parser("serve", help="run the HTTP transcription service")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--max-body-bytes", type=int, default=DEFAULT_MAX_BODY_BYTES)
    sp.set_defaults(fn=_cmd_serve)

    sp = sub.add_parser("gradcheck", help="finite-difference gradient check")
    sp.add_argument("--preset", default="toy", choices=sorted(presets()))
    sp.add_argument("--eps", type=float, default=1e-5)
    sp.add_argument("--coords", type=int, default=200)
    sp.set_defaults(fn=_cmd_gradcheck)

    sp = sub.add_parser("params", help="print preset parameter counts")
    sp.set_defaults(fn=_cmd_params)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _load_config(args.config)
        return args.fn(args, config)
    except SystemExit as e:
        return int(e.code or 0)
    except SanskritAsrError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

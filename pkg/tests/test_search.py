import dataclasses
import json
import math

import pytest

from sanskrit_asr.errors import NoViableTrial
from sanskrit_asr.model import ModelConfig
from sanskrit_asr.search import (
    BEST_FILE,
    TRIALS_LOG,
    SearchSpace,
    TrialRecord,
    load_trials,
    run_search,
    sample,
)
from sanskrit_asr.training import HyperParams


def micro_cfg():
    return ModelConfig(
        n_layers=1,
        d_model=32,
        n_heads=2,
        vocab_size=32,
        max_audio_frames=100,
        max_text_tokens=40,
    )


class TestSearchSpace:
    def test_default_bounds(self):
        space = SearchSpace()
        assert space.mlp_dropout == (0.2, 0.6)
        assert space.attn_dropout == (0.2, 0.6)
        assert space.learning_rate == (1e-5, 3e-5)
        assert set(space.optimizers) == {"adam", "adamw", "adam_hf", "adagrad"}
        assert set(space.schedulers) == {
            "linear",
            "linear_warmup",
            "cosine",
            "reduce_on_plateau",
        }

    def test_size_classes(self):
        assert SearchSpace.for_size("small").learning_rate == (1e-5, 3e-5)
        assert SearchSpace.for_size("medium").learning_rate == (5e-5, 8e-5)
        with pytest.raises(ValueError):
            SearchSpace.for_size("huge")

    def test_empty_interval_rejected(self):
        with pytest.raises(ValueError):
            SearchSpace(mlp_dropout=(0.6, 0.2))

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            SearchSpace(optimizers=())


class TestSample:
    def test_thousand_draws_respect_bounds(self):
        space = SearchSpace()
        seen_opt = set()
        seen_sched = set()
        for trial in range(1000):
            hp = sample(space, rng_seed=0, trial_id=trial)
            assert 0.2 <= hp.mlp_dropout <= 0.6
            assert 0.2 <= hp.attn_dropout <= 0.6
            assert 1e-5 <= hp.learning_rate <= 3e-5
            seen_opt.add(hp.optimizer)
            seen_sched.add(hp.scheduler)
        assert seen_opt == set(space.optimizers)
        assert seen_sched == set(space.schedulers)

    def test_medium_class_bounds(self):
        space = SearchSpace.for_size("medium")
        for trial in range(200):
            hp = sample(space, rng_seed=1, trial_id=trial)
            assert 5e-5 <= hp.learning_rate <= 8e-5

    def test_deterministic(self):
        space = SearchSpace()
        assert sample(space, 7, 3) == sample(space, 7, 3)
        assert sample(space, 7, 3) != sample(space, 7, 4)
        assert sample(space, 8, 3) != sample(space, 7, 3)

    def test_trial_id_becomes_seed(self):
        hp = sample(SearchSpace(), rng_seed=0, trial_id=11)
        assert hp.seed == 11

    def test_base_fields_pass_through(self):
        base = HyperParams(batch_size=2, max_epochs=3)
        hp = sample(SearchSpace(), 0, 0, base=base)
        assert hp.batch_size == 2
        assert hp.max_epochs == 3


class TestTrialRecord:
    def rec(self, **kw):
        base = dict(
            trial_id=0,
            hp=HyperParams(),
            best_val_wer=0.5,
            best_val_loss=1.2,
            epochs_run=3,
            wall_time_s=1.5,
            status="ok",
        )
        base.update(kw)
        return TrialRecord(**base)

    def test_json_round_trip(self):
        rec = self.rec()
        assert TrialRecord.from_json(rec.to_json()) == rec

    def test_infinity_maps_to_null(self):
        rec = self.rec(best_val_wer=math.inf, best_val_loss=math.inf, status="diverged")
        payload = rec.to_json()
        assert payload["best_val_wer"] is None
        assert json.loads(json.dumps(payload)) == payload
        assert TrialRecord.from_json(payload) == rec


class TestRunSearch:
    def base_hp(self):
        return HyperParams(batch_size=4, max_epochs=1, learning_rate=1e-4)

    def test_log_and_best(self, tiny_corpus, tmp_path):
        best, records = run_search(
            SearchSpace(learning_rate=(1e-4, 3e-4)),
            n_trials=3,
            cfg=micro_cfg(),
            ds=tiny_corpus,
            budget_per_trial=1,
            out_dir=tmp_path,
            base_hp=self.base_hp(),
        )
        assert len(records) == 3
        log_lines = (tmp_path / TRIALS_LOG).read_text().strip().splitlines()
        assert len(log_lines) == 3
        ok = [r for r in records if r.status == "ok"]
        assert best.best_val_wer == min(r.best_val_wer for r in ok)
        best_payload = json.loads((tmp_path / BEST_FILE).read_text())
        assert best_payload["trial_id"] == best.trial_id

    def test_resume_skips_completed(self, tiny_corpus, tmp_path):
        space = SearchSpace(learning_rate=(1e-4, 3e-4))
        run_search(
            space, n_trials=2, cfg=micro_cfg(), ds=tiny_corpus,
            budget_per_trial=1, out_dir=tmp_path, base_hp=self.base_hp(),
        )
        first_two = load_trials(tmp_path / TRIALS_LOG)
        _, records = run_search(
            space, n_trials=3, cfg=micro_cfg(), ds=tiny_corpus,
            budget_per_trial=1, out_dir=tmp_path, base_hp=self.base_hp(),
        )
        assert len(records) == 3
        assert records[:2] == first_two

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergent_trial_isolated(self, tiny_corpus, tmp_path):
        def blow_up(trial_id, hp):
            if trial_id == 0:
                return dataclasses.replace(hp, learning_rate=1e200)
            return hp

        best, records = run_search(
            SearchSpace(learning_rate=(1e-4, 3e-4)),
            n_trials=2,
            cfg=micro_cfg(),
            ds=tiny_corpus,
            budget_per_trial=1,
            out_dir=tmp_path,
            base_hp=self.base_hp(),
            hp_override=blow_up,
        )
        assert records[0].status == "diverged"
        assert records[0].best_val_wer == math.inf
        assert records[1].status == "ok"
        assert best.trial_id == 1

    def test_all_failed_raises(self, tiny_corpus, tmp_path):
        def sabotage(trial_id, hp):
            return dataclasses.replace(hp, batch_size=0)

        with pytest.raises(NoViableTrial):
            run_search(
                SearchSpace(),
                n_trials=2,
                cfg=micro_cfg(),
                ds=tiny_corpus,
                budget_per_trial=1,
                out_dir=tmp_path,
                base_hp=self.base_hp(),
                hp_override=sabotage,
            )
        assert all(
            r.status == "failed" for r in load_trials(tmp_path / TRIALS_LOG)
        )

    def test_argmin_unchanged_by_positive_scaling(self):
        records = [
            TrialRecord(i, HyperParams(), wer, 1.0, 1, 1.0, "ok")
            for i, wer in enumerate([0.5, 0.2, 0.9])
        ]
        argmin = min(records, key=lambda r: r.best_val_wer).trial_id
        scaled = [
            dataclasses.replace(r, best_val_wer=r.best_val_wer * 7.3) for r in records
        ]
        assert min(scaled, key=lambda r: r.best_val_wer).trial_id == argmin

    def test_zero_trials_rejected(self, tiny_corpus, tmp_path):
        with pytest.raises(ValueError):
            run_search(
                SearchSpace(), n_trials=0, cfg=micro_cfg(), ds=tiny_corpus,
                out_dir=tmp_path,
            )

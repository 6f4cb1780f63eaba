import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sanskrit_asr.data import Dataset
from sanskrit_asr.errors import EmptySplit, InvalidSchedule, NonFiniteGrad
from sanskrit_asr.model import ModelConfig, init_params
from sanskrit_asr.training import (
    EpochRecord,
    HyperParams,
    PlateauState,
    TrainHistory,
    clip_gradients,
    early_stop,
    grad_check,
    lr_schedule,
    optimizer_step,
    train,
)


def scalar_params():
    cfg = ModelConfig(n_layers=1, d_model=2, n_heads=1, vocab_size=4,
                      max_audio_frames=4, max_text_tokens=4)
    params = init_params(cfg, seed=0)
    name = "conv1.b"
    params.tensors[name].data[:] = 1.0
    return params, name


def micro_cfg():
    return ModelConfig(
        n_layers=1,
        d_model=32,
        n_heads=2,
        vocab_size=32,
        max_audio_frames=100,
        max_text_tokens=40,
    )


class TestOptimizerStep:
    def test_adam_hand_value(self):
        params, name = scalar_params()
        g = np.ones_like(params.tensors[name].data)
        hp = HyperParams(optimizer="adam", learning_rate=0.1)
        optimizer_step({}, params, {name: g}, hp, step=1)
        # m=0.1, v=0.001, bias-corrected to 1 and 1: w - 0.1/(1+1e-8)
        np.testing.assert_allclose(params.tensors[name].data, 0.9, atol=1e-6)

    def test_adagrad_hand_value(self):
        params, name = scalar_params()
        g = np.ones_like(params.tensors[name].data)
        hp = HyperParams(optimizer="adagrad", learning_rate=0.1)
        optimizer_step({}, params, {name: g}, hp, step=1, eps=0.0)
        np.testing.assert_allclose(params.tensors[name].data, 0.9, atol=1e-12)

    def test_adam_zero_grad_is_noop(self):
        params, name = scalar_params()
        g = np.zeros_like(params.tensors[name].data)
        hp = HyperParams(optimizer="adam")
        optimizer_step({}, params, {name: g}, hp, step=1)
        np.testing.assert_array_equal(params.tensors[name].data, 1.0)

    def test_adamw_zero_grad_decays_only(self):
        params, name = scalar_params()
        g = np.zeros_like(params.tensors[name].data)
        hp = HyperParams(optimizer="adamw", learning_rate=0.1, weight_decay=0.01)
        optimizer_step({}, params, {name: g}, hp, step=1)
        np.testing.assert_allclose(params.tensors[name].data, 1.0 - 0.1 * 0.01)

    def test_adamw_decay_magnitude_non_increasing(self):
        params, name = scalar_params()
        hp = HyperParams(optimizer="adamw", learning_rate=0.05, weight_decay=0.1)
        state = {}
        prev = np.abs(params.tensors[name].data.copy())
        for step in range(1, 6):
            g = np.zeros_like(params.tensors[name].data)
            optimizer_step(state, params, {name: g}, hp, step=step)
            cur = np.abs(params.tensors[name].data)
            assert np.all(cur <= prev)
            prev = cur.copy()

    def test_adam_hf_epsilon_placement(self):
        a, name = scalar_params()
        b, _ = scalar_params()
        g = np.ones_like(a.tensors[name].data)
        optimizer_step({}, a, {name: g}, HyperParams(optimizer="adam", learning_rate=0.1), 1, eps=1.0)
        optimizer_step({}, b, {name: g}, HyperParams(optimizer="adam_hf", learning_rate=0.1), 1, eps=1.0)
        # adam: 1 - 0.1/(1+1); adam_hf: 1 - 0.1/sqrt(1+1)
        np.testing.assert_allclose(a.tensors[name].data, 1 - 0.05, atol=1e-12)
        np.testing.assert_allclose(b.tensors[name].data, 1 - 0.1 / math.sqrt(2), atol=1e-12)

    def test_nonfinite_gradient_rejected(self):
        params, name = scalar_params()
        g = np.full_like(params.tensors[name].data, np.nan)
        with pytest.raises(NonFiniteGrad):
            optimizer_step({}, params, {name: g}, HyperParams(), step=1)

    def test_step_must_be_positive(self):
        params, name = scalar_params()
        g = np.zeros_like(params.tensors[name].data)
        with pytest.raises(ValueError):
            optimizer_step({}, params, {name: g}, HyperParams(), step=0)


class TestSchedules:
    def test_linear_endpoints(self):
        assert lr_schedule("linear", 0.3, 0, 100) == 0.3
        assert lr_schedule("linear", 0.3, 100, 100) == 0.0

    def test_cosine_midpoint(self):
        assert lr_schedule("cosine", 0.4, 50, 100) == pytest.approx(0.2, abs=1e-12)

    def test_cosine_endpoints(self):
        assert lr_schedule("cosine", 0.4, 0, 100) == 0.4
        assert lr_schedule("cosine", 100, 100, 100) == pytest.approx(0.0, abs=1e-12)

    def test_warmup_ramp_and_decay(self):
        base = 1.0
        assert lr_schedule("linear_warmup", base, 0, 100, warmup_steps=10) == 0.0
        assert lr_schedule("linear_warmup", base, 5, 100, warmup_steps=10) == 0.5
        assert lr_schedule("linear_warmup", base, 10, 100, warmup_steps=10) == base
        assert lr_schedule("linear_warmup", base, 100, 100, warmup_steps=10) == 0.0

    @given(
        st.floats(min_value=1e-6, max_value=1.0),
        st.integers(min_value=1, max_value=10_000),
        st.data(),
    )
    @settings(max_examples=200, deadline=None)
    def test_closed_forms(self, base, total, data):
        step = data.draw(st.integers(min_value=0, max_value=total))
        warmup = data.draw(st.integers(min_value=0, max_value=total - 1))
        lin = lr_schedule("linear", base, step, total)
        assert math.isclose(lin, base * (1 - step / total), rel_tol=1e-9, abs_tol=1e-15)
        cos = lr_schedule("cosine", base, step, total)
        assert math.isclose(
            cos, base * 0.5 * (1 + math.cos(math.pi * step / total)),
            rel_tol=1e-9, abs_tol=1e-15,
        )
        warm = lr_schedule("linear_warmup", base, step, total, warmup_steps=warmup)
        if warmup > 0 and step < warmup:
            expect = base * step / warmup
        else:
            expect = base * (1 - (step - warmup) / (total - warmup))
        assert math.isclose(warm, expect, rel_tol=1e-9, abs_tol=1e-15)

    def test_plateau_requires_state(self):
        with pytest.raises(InvalidSchedule):
            lr_schedule("reduce_on_plateau", 0.1, 1, 10)

    def test_plateau_returns_state_lr(self):
        state = PlateauState(lr=0.02, patience=2)
        assert lr_schedule("reduce_on_plateau", 0.1, 1, 10, plateau_state=state) == 0.02

    def test_zero_total_rejected(self):
        with pytest.raises(InvalidSchedule):
            lr_schedule("linear", 0.1, 0, 0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(InvalidSchedule):
            lr_schedule("exponential", 0.1, 0, 10)

    def test_step_outside_range_rejected(self):
        with pytest.raises(InvalidSchedule):
            lr_schedule("linear", 0.1, 11, 10)


class TestPlateauState:
    def test_halves_after_patience(self):
        s = PlateauState(lr=0.1, patience=2)
        s.update(1.0)
        s.update(1.0)
        s.update(1.0)
        assert s.lr == pytest.approx(0.05)

    def test_improvement_resets(self):
        s = PlateauState(lr=0.1, patience=2)
        s.update(1.0)
        s.update(1.1)
        s.update(0.5)
        s.update(0.6)
        assert s.lr == 0.1
        assert s.stale == 1

    def test_floor(self):
        s = PlateauState(lr=1.5e-7, patience=1)
        s.update(1.0)
        s.update(1.0)
        s.update(1.0)
        assert s.lr == 1e-7


class TestEarlyStop:
    def test_strictly_decreasing_never_stops(self):
        assert early_stop([1.0, 0.9, 0.8, 0.7], patience=2) is False

    def test_monotone_increase(self):
        assert early_stop([1.0, 1.1, 1.2, 1.3], patience=3) is True

    def test_improvement_resets(self):
        assert early_stop([1.0, 1.1, 0.9], patience=2) is False

    def test_tiny_improvement_does_not_reset(self):
        assert early_stop([1.0, 1.0 - 1e-9, 1.0 - 2e-9], patience=2) is True

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            early_stop([], patience=1)


class TestClipGradients:
    def test_scales_to_max_norm(self):
        grads = {"a": np.array([3.0]), "b": np.array([4.0])}
        total = clip_gradients(grads, max_norm=1.0)
        assert total == pytest.approx(5.0)
        clipped = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        assert clipped == pytest.approx(1.0)

    def test_below_threshold_untouched(self):
        grads = {"a": np.array([0.3])}
        clip_gradients(grads, max_norm=1.0)
        np.testing.assert_array_equal(grads["a"], [0.3])

    def test_zero_max_norm_disables(self):
        grads = {"a": np.array([30.0])}
        clip_gradients(grads, max_norm=0.0)
        np.testing.assert_array_equal(grads["a"], [30.0])


class TestGradCheck:
    cfg = ModelConfig(
        n_layers=1, d_model=8, n_heads=2, n_mels=8,
        vocab_size=8, max_audio_frames=8, max_text_tokens=6,
    )

    def batch(self):
        rng = np.random.default_rng(0)
        mels = rng.normal(-5.0, 4.0, size=(1, 8, 8))
        tokens = np.array([[1, 4, 5, 2]])
        return mels, tokens

    def test_tape_matches_finite_differences(self):
        err = grad_check(self.cfg, self.batch(), n_coords=4, seed=0)
        assert err < 1e-4

    def test_sabotaged_gradient_detected(self):
        err = grad_check(
            self.cfg, self.batch(), n_coords=4, seed=0,
            grad_scale={"dec.0.mlp.fc.w": 2.0},
        )
        assert err > 0.5

    def test_zero_eps_rejected(self):
        with pytest.raises(ValueError):
            grad_check(self.cfg, self.batch(), eps=0.0)


class TestHistory:
    def test_epochs_strictly_increasing(self):
        h = TrainHistory()
        h.append(EpochRecord(1, 1.0, 1.0, 0.5, 1e-3))
        with pytest.raises(ValueError):
            h.append(EpochRecord(1, 0.9, 0.9, 0.4, 1e-3))

    def test_save_load_round_trip(self, tmp_path):
        h = TrainHistory()
        h.append(EpochRecord(1, 1.0, 0.9, 0.5, 1e-3))
        h.append(EpochRecord(2, 0.8, 0.7, 0.3, 9e-4))
        path = tmp_path / "history.jsonl"
        h.save(path)
        assert TrainHistory.load(path).records == h.records

    def test_best_val_wer(self):
        h = TrainHistory()
        h.append(EpochRecord(1, 1.0, 0.9, 0.5, 1e-3))
        h.append(EpochRecord(2, 0.8, 0.7, 0.2, 9e-4))
        h.append(EpochRecord(3, 0.7, 0.8, 0.4, 8e-4))
        assert h.best_val_wer() == 0.2


class TestTrainLoop:
    def hp(self, **kw):
        base = dict(
            mlp_dropout=0.0,
            attn_dropout=0.0,
            learning_rate=3e-4,
            max_epochs=2,
            batch_size=4,
            patience=5,
            seed=0,
        )
        base.update(kw)
        return HyperParams(**base)

    def test_deterministic_given_seed(self, tiny_corpus):
        p1, h1 = train(micro_cfg(), tiny_corpus, self.hp())
        p2, h2 = train(micro_cfg(), tiny_corpus, self.hp())
        assert h1.records == h2.records
        for name in p1.tensors:
            np.testing.assert_array_equal(p1.tensors[name].data, p2.tensors[name].data)

    def test_history_shape_and_lr_schedule(self, tiny_corpus):
        _, hist = train(micro_cfg(), tiny_corpus, self.hp())
        assert [r.epoch for r in hist.records] == [1, 2]
        assert all(np.isfinite(r.train_loss) for r in hist.records)
        assert all(r.lr >= 0 for r in hist.records)

    def test_early_stop_on_flat_loss(self, tiny_corpus):
        hp = self.hp(learning_rate=1e-12, max_epochs=10, patience=1)
        _, hist = train(micro_cfg(), tiny_corpus, hp)
        assert len(hist) == 2

    def test_freeze_encoder(self, tiny_corpus):
        cfg = micro_cfg()
        params, _ = train(cfg, tiny_corpus, self.hp(max_epochs=1), freeze_encoder=True)
        fresh = init_params(
            params.config, self.hp().seed, vocab=params.vocab, name=params.name
        )
        np.testing.assert_array_equal(
            params.tensors["conv1.w"].data, fresh.tensors["conv1.w"].data
        )
        assert not np.array_equal(
            params.tensors["dec.0.mlp.fc.w"].data, fresh.tensors["dec.0.mlp.fc.w"].data
        )

    def test_empty_val_split_rejected(self, tiny_corpus):
        no_val = Dataset(
            [e for e in tiny_corpus.entries if e.split != "val"],
            vocab=tiny_corpus.vocab,
            root=tiny_corpus.root,
        )
        with pytest.raises(EmptySplit):
            train(micro_cfg(), no_val, self.hp())

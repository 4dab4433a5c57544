"""Tests for the learning-rate schedule, Adam, and the training loop:
closed-form anchor values, determinism, and checkpoint resume."""

import numpy as np
import pytest

import promptmt.autodiff as ad
from promptmt.errors import NumericError
from promptmt.model import (ModelConfig, MultimodalTranslator,
                            load_checkpoint, save_checkpoint)
from promptmt.text import BOS_ID, EOS_ID, ParallelExample
from promptmt.train import (TrainConfig, TrainState, adam_step, lr_schedule,
                            train_loop)
from promptmt.vision import pseudo_visual_tokens

CFG = TrainConfig()


# ---------------------------------------------------------------------------
# schedule
# ---------------------------------------------------------------------------

def test_lr_step_one_is_warm_start():
    assert abs(lr_schedule(1, CFG) - 1e-7) < 1e-12


def test_lr_peak_at_warmup_end():
    assert lr_schedule(2000, CFG) == pytest.approx(1e-4, abs=1e-12)


def test_lr_inverse_sqrt_closed_form():
    assert lr_schedule(8000, CFG) == pytest.approx(5e-5, rel=1e-9)


def test_lr_continuous_at_warmup_boundary():
    lo = lr_schedule(2000, CFG)
    hi = lr_schedule(2001, CFG)
    assert abs(hi - lo) < 1e-7
    assert hi == pytest.approx(1e-4 * np.sqrt(2000 / 2001), rel=1e-9)


def test_lr_monotone_warmup_then_decay():
    values = [lr_schedule(s, CFG) for s in range(1, 2001)]
    assert all(a < b for a, b in zip(values, values[1:]))
    tail = [lr_schedule(s, CFG) for s in range(2000, 4000)]
    assert all(a >= b for a, b in zip(tail, tail[1:]))


def test_lr_requires_positive_step():
    with pytest.raises(ValueError):
        lr_schedule(0, CFG)


# ---------------------------------------------------------------------------
# adam
# ---------------------------------------------------------------------------

def scalar_param(value=1.0):
    return {"w": ad.Tensor(np.array([value], dtype=np.float32),
                           requires_grad=True)}


def test_adam_first_step_closed_form():
    # with zero-initialized moments, the bias-corrected first update is
    # exactly -lr * g / (|g| + eps)
    params = scalar_param(1.0)
    g = 0.37
    params["w"].grad = np.array([g], dtype=np.float32)
    state = TrainState(config=CFG, step=1, seed=0,
                       m={"w": np.zeros(1, np.float32)},
                       v={"w": np.zeros(1, np.float32)})
    adam_step(params, state, lr=1e-3)
    expected = 1.0 - 1e-3 * g / (abs(g) + CFG.adam_eps)
    assert params["w"].data[0] == pytest.approx(expected, abs=1e-6)
    # and the update magnitude is ~ lr * sign(g)
    assert 1.0 - params["w"].data[0] == pytest.approx(1e-3, rel=1e-4)


def test_adam_zero_gradient_keeps_parameters():
    params = scalar_param(2.5)
    params["w"].grad = np.zeros(1, dtype=np.float32)
    state = TrainState(config=CFG, step=1, seed=0,
                       m={"w": np.zeros(1, np.float32)},
                       v={"w": np.zeros(1, np.float32)})
    adam_step(params, state, lr=1e-3)
    assert params["w"].data[0] == 2.5


def test_adam_rejects_nonfinite_gradient():
    params = scalar_param()
    params["w"].grad = np.array([np.nan], dtype=np.float32)
    state = TrainState(config=CFG, step=1, seed=0,
                       m={"w": np.zeros(1, np.float32)},
                       v={"w": np.zeros(1, np.float32)})
    with pytest.raises(NumericError, match="'w'"):
        adam_step(params, state, lr=1e-3)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

def toy_setup(variant="full", seed=3):
    cfg = ModelConfig(vocab_size=30, d_model=16, n_heads=2, n_enc_layers=1,
                      n_dec_layers=1, d_v=8, variant=variant,
                      dropout=0.1, eps_ls=0.0)
    model = MultimodalTranslator(cfg, seed=seed)
    examples = []
    for i in range(6):
        tag = 5 + i % 2
        examples.append(ParallelExample(
            example_id=f"toy{i}", source_lang="en",
            target_lang="de" if tag == 5 else "fr",
            source_ids=[tag, BOS_ID, 10 + i, 11, EOS_ID],
            target_ids=[BOS_ID, 20 + i, 21, EOS_ID],
            image_id=f"img{i}"))
    visual = {f"img{i}": pseudo_visual_tokens(f"img{i}", 3, 8, seed=0)
              for i in range(6)}
    tcfg = TrainConfig(lr_peak=1e-3, warmup_steps=10, max_tokens=40, seed=7)
    return model, examples, visual, tcfg


def test_loss_trend_decreases_over_first_steps():
    model, examples, visual, tcfg = toy_setup()
    state = TrainState.fresh(model, tcfg)
    rows = train_loop(model, examples, visual, state, epochs=30, max_steps=50)
    assert rows[-1].loss < rows[0].loss


def test_two_runs_same_seed_bitwise_identical():
    def run():
        model, examples, visual, tcfg = toy_setup()
        state = TrainState.fresh(model, tcfg)
        train_loop(model, examples, visual, state, epochs=4)
        return model

    m1, m2 = run(), run()
    for name in m1.params:
        assert np.array_equal(m1.params[name].data, m2.params[name].data), name


def test_resume_reproduces_next_step_loss(tmp_path):
    model, examples, visual, tcfg = toy_setup()
    state = TrainState.fresh(model, tcfg)
    train_loop(model, examples, visual, state, epochs=2,
               out_dir=tmp_path / "run")

    # continue the original in memory
    rows_direct = train_loop(model, examples, visual, state, epochs=3)

    # resume from the epoch-2 checkpoint
    resumed, ck_state = load_checkpoint(tmp_path / "run" / "checkpoint_last.lvpm")
    rstate = TrainState.from_checkpoint_dict(ck_state)
    rows_resumed = train_loop(resumed, examples, visual, rstate, epochs=3)

    assert rows_direct[0].step == rows_resumed[0].step
    assert rows_direct[0].loss == pytest.approx(rows_resumed[0].loss, abs=0)
    for name in model.params:
        assert np.array_equal(model.params[name].data,
                              resumed.params[name].data), name


def test_text_only_trains_without_vtok():
    model, examples, _, tcfg = toy_setup(variant="text_only")
    model.config.d_v = 0
    state = TrainState.fresh(model, tcfg)
    rows = train_loop(model, examples, None, state, epochs=1)
    assert len(rows) >= 1 and np.isfinite(rows[-1].loss)


def test_metrics_csv_written(tmp_path):
    model, examples, visual, tcfg = toy_setup()
    state = TrainState.fresh(model, tcfg)
    train_loop(model, examples, visual, state, epochs=1,
               out_dir=tmp_path / "run")
    lines = (tmp_path / "run" / "metrics.csv").read_text().splitlines()
    assert lines[0] == "step,epoch,lr,loss,tokens_per_sec"
    assert len(lines) >= 2


def test_checkpoint_moments_roundtrip_bit_exact(tmp_path):
    model, examples, visual, tcfg = toy_setup()
    state = TrainState.fresh(model, tcfg)
    train_loop(model, examples, visual, state, epochs=1)
    path = tmp_path / "ck.lvpm"
    save_checkpoint(path, model, state.to_checkpoint_dict())
    _, loaded = load_checkpoint(path)
    for name in model.params:
        assert np.array_equal(loaded["m"][name], state.m[name])
        assert np.array_equal(loaded["v"][name], state.v[name])

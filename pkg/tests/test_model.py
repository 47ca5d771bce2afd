"""Model: shapes, initialization, losses, gradients, checkpoints."""

import numpy as np
import pytest

import beamsel.model as model_mod
from beamsel.errors import DataFormatError
from beamsel.model import (
    ModelConfig,
    Output,
    backward,
    forward,
    gradient_check,
    init_model,
    load_model,
    loss,
    param_count,
    predict,
    predict_from_output,
    save_model,
)


def test_param_count_reference_config():
    # 2 reporting stations, 4 candidate stations, 16 beams
    cfg = ModelConfig(n_sub6_bs=2, n_mmw_bs=4, n_beams=16)
    assert param_count(cfg) == 146836


def test_param_count_matches_tensors(small_model_config):
    model = init_model(small_model_config)
    total = sum(t.size for t in model.params.values())
    assert total == param_count(small_model_config)
    assert len(model.params) == 22


def test_init_determinism(small_model_config):
    a = init_model(small_model_config)
    b = init_model(small_model_config)
    for name in a.params:
        np.testing.assert_array_equal(a.params[name], b.params[name])
    import dataclasses
    other = init_model(dataclasses.replace(small_model_config, rng_seed=8))
    assert any(not np.array_equal(a.params[n], other.params[n])
               for n in a.params)


def test_init_scheme(small_model_config):
    model = init_model(small_model_config)
    for name, tensor in model.params.items():
        if name.endswith("_b"):
            np.testing.assert_array_equal(tensor, np.zeros_like(tensor))
        else:
            fan_in = tensor.shape[0]
            bound = np.sqrt(6.0 / fan_in)
            assert np.max(np.abs(tensor)) <= bound
            # a healthy spread, not a constant
            assert np.std(tensor) > 0


def test_forward_shapes_and_ranges(small_model_config):
    model = init_model(small_model_config)
    rng = np.random.default_rng(1)
    x = rng.uniform(size=(7, 2, 5))
    out, cache = forward(model, x)
    assert out.bs_probs.shape == (7, 3)
    assert out.beam_rates.shape == (7, 4)
    np.testing.assert_allclose(out.bs_probs.sum(axis=1), np.ones(7),
                               atol=1e-12)
    assert np.all(out.bs_probs > 0)
    assert np.all(out.beam_rates >= 0)  # output stage clamps at zero
    # single sample without the batch axis works too
    out1, _ = forward(model, x[0])
    np.testing.assert_allclose(out1.bs_probs[0], out.bs_probs[0], atol=1e-12)


def test_loss_hand_cases():
    probs = np.full((2, 4), 0.25)
    rates = np.array([[1.0, 0.0], [0.0, 1.0]])
    targets = np.array([[0.0, 0.0], [0.0, 1.0]])
    out = Output(bs_probs=probs, beam_rates=rates)
    # CE at uniform probabilities is ln(4); squared error averages
    # (1 + 0 + 0 + 0) / 4 over both samples and beam entries
    ce = np.log(4.0)
    mse = 0.25
    assert loss(out, [0, 3], targets) == pytest.approx(ce + mse, rel=1e-12)
    assert loss(out, [0, 3], targets, lambda_cls=2.0, lambda_reg=0.5) == \
        pytest.approx(2.0 * ce + 0.5 * mse, rel=1e-12)


def test_loss_zero_at_perfect_output():
    probs = np.array([[1.0, 0.0, 0.0]])
    rates = np.array([[0.3, 1.0, 0.0, 0.2]])
    out = Output(bs_probs=probs, beam_rates=rates)
    assert loss(out, [0], rates.copy()) == 0.0


def test_loss_validates_shapes():
    out = Output(bs_probs=np.full((2, 3), 1 / 3), beam_rates=np.zeros((2, 4)))
    with pytest.raises(ValueError):
        loss(out, [0], np.zeros((2, 4)))
    with pytest.raises(ValueError):
        loss(out, [0, 1], np.zeros((2, 5)))


def _jitter_biases(model, rng, scale=0.05):
    # Zero-init biases can leave a pre-activation at exactly 0 when an
    # entire upstream layer is dead for a sample; the central difference
    # then straddles the ReLU kink and disagrees with the (equally valid)
    # strict subgradient. Moving biases off zero makes the check
    # well-posed.
    for name in model.params:
        if name.endswith("_b"):
            model.params[name] += rng.uniform(-scale, scale,
                                              size=model.params[name].shape)


def test_gradient_check_small_config(small_model_config):
    model = init_model(small_model_config)
    rng = np.random.default_rng(2)
    _jitter_biases(model, rng)
    x = rng.uniform(size=(3, 2, 5))
    bs = rng.integers(0, 3, size=3)
    targets = rng.uniform(size=(3, 4))
    report = gradient_check(model, x, bs, targets, eps=1e-5,
                            lambda_cls=1.0, lambda_reg=2.0)
    assert set(report) == set(model.params)
    worst = max(report.values())
    assert worst < 1e-4, f"worst relative error {worst:.3e}"


def test_gradient_check_catches_corruption(small_model_config, monkeypatch):
    # negative control: a wrong analytic gradient must trip the check
    real_backward = model_mod.backward

    def corrupted(model, cache, bs_labels, targets, lambda_cls=1.0,
                  lambda_reg=1.0):
        grads = real_backward(model, cache, bs_labels, targets,
                              lambda_cls, lambda_reg)
        grads["base1_w"] = grads["base1_w"] + 1.0
        return grads

    monkeypatch.setattr(model_mod, "backward", corrupted)
    model = init_model(small_model_config)
    rng = np.random.default_rng(3)
    _jitter_biases(model, rng)
    x = rng.uniform(size=(2, 2, 5))
    report = model_mod.gradient_check(model, x, rng.integers(0, 3, size=2),
                                      rng.uniform(size=(2, 4)))
    assert report["base1_w"] > 1e-2


def test_single_sample_overfit(small_model_config):
    model = init_model(small_model_config)
    # start the output stage in its linear region: a beam output that is
    # clamped at zero with a positive target would stay dead under
    # gradient descent (the clamp has zero slope there)
    model.params["beam_out_b"] += 0.2
    rng = np.random.default_rng(4)
    x = rng.uniform(size=(1, 2, 5))
    bs = np.array([1])
    target = np.array([[0.2, 1.0, 0.4, 0.1]])
    out, _ = forward(model, x)
    initial = loss(out, bs, target)
    for _ in range(1500):
        _, cache = forward(model, x)
        grads = backward(model, cache, bs, target)
        for name in model.params:
            model.params[name] -= 0.02 * grads[name]
    out, _ = forward(model, x)
    # the regression head can hit its target exactly; cross-entropy only
    # approaches zero as the logit gap grows, so check confidence instead
    np.testing.assert_allclose(out.beam_rates, target, atol=1e-4)
    assert out.bs_probs[0, 1] > 0.95
    assert loss(out, bs, target) < min(0.1, initial / 10)


def test_predict_ordering(small_model_config):
    probs = np.array([[0.1, 0.7, 0.2], [0.5, 0.25, 0.25]])
    rates = np.array([[0.3, 0.9, 0.9, 0.1], [1.0, 0.2, 0.3, 0.4]])
    out = Output(bs_probs=probs, beam_rates=rates)
    stations, beams = predict_from_output(out, b=3)
    np.testing.assert_array_equal(stations, [1, 0])
    np.testing.assert_array_equal(beams[0], [1, 2, 0])  # tie keeps low index
    np.testing.assert_array_equal(beams[1], [0, 3, 2])

    model = init_model(small_model_config)
    rng = np.random.default_rng(5)
    x = rng.uniform(size=(4, 2, 5))
    st, bm = predict(model, x, b=2)
    o, _ = forward(model, x)
    st2, bm2 = predict_from_output(o, b=2)
    np.testing.assert_array_equal(st, st2)
    np.testing.assert_array_equal(bm, bm2)


def test_checkpoint_round_trip(tmp_path, small_model_config):
    model = init_model(small_model_config)
    # make the weights non-initial so the test is not vacuous
    rng = np.random.default_rng(6)
    for name in model.params:
        model.params[name] += rng.normal(scale=0.01,
                                         size=model.params[name].shape)
    path = tmp_path / "model.ckpt"
    save_model(model, path, config_hash="c0ffee")
    back, config_hash = load_model(path)
    assert config_hash == "c0ffee"
    assert back.config == small_model_config
    for name in model.params:
        np.testing.assert_array_equal(back.params[name], model.params[name])
    x = np.random.default_rng(7).uniform(size=(3, 2, 5))
    out_a, _ = forward(model, x)
    out_b, _ = forward(back, x)
    np.testing.assert_array_equal(out_a.bs_probs, out_b.bs_probs)
    np.testing.assert_array_equal(out_a.beam_rates, out_b.beam_rates)


def test_load_model_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(DataFormatError):
        load_model(bad)


def test_model_config_validation():
    with pytest.raises(Exception):
        ModelConfig(n_sub6_bs=0, n_mmw_bs=4, n_beams=16)
    with pytest.raises(Exception):
        ModelConfig(n_sub6_bs=2, n_mmw_bs=4, n_beams=0)
    cfg = ModelConfig(n_sub6_bs=2, n_mmw_bs=4, n_beams=16)
    back = ModelConfig.from_dict(cfg.to_dict())
    assert back == cfg

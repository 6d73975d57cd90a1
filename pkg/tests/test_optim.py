import math

import numpy as np
import pytest

from chatforge.training import (
    AdamState,
    EarlyStopping,
    LossScaler,
    accumulate,
    adam_step,
    clip_gradients,
    early_stop_update,
    label_smoothed_ce,
    loss_scaler_update,
)


class TestClipGradients:
    def test_three_four_five(self):
        grads = {"g": np.array([3.0, 4.0])}
        clipped, norm = clip_gradients(grads, 1.0)
        assert norm == pytest.approx(5.0, abs=1e-12)
        assert np.allclose(clipped["g"], [0.6, 0.8], atol=1e-12)

    def test_small_norm_unchanged(self):
        grads = {"g": np.array([0.3, 0.4])}
        clipped, norm = clip_gradients(grads, 1.0)
        assert norm == pytest.approx(0.5, abs=1e-12)
        assert np.array_equal(clipped["g"], grads["g"])

    def test_nonfinite_signals_overflow(self):
        grads = {"g": np.array([1.0, np.inf])}
        clipped, norm = clip_gradients(grads, 1.0)
        assert not math.isfinite(norm)
        assert clipped is grads  # untouched

    def test_joint_norm_over_groups(self):
        grads = {"a": np.array([3.0]), "b": np.array([4.0])}
        _, norm = clip_gradients(grads, 10.0)
        assert norm == pytest.approx(5.0, abs=1e-12)

    def test_never_increases_norm(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            grads = {"g": rng.normal(size=7), "h": rng.normal(size=(3, 2))}
            pre = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            clipped, norm = clip_gradients(grads, 1.0)
            post = math.sqrt(sum(float(np.sum(g * g)) for g in clipped.values()))
            assert norm == pytest.approx(pre, rel=1e-12)
            assert post <= min(pre, 1.0) + 1e-12
            assert abs(post - min(pre, 1.0)) < 1e-12

    def test_bad_max_norm(self):
        with pytest.raises(ValueError):
            clip_gradients({"g": np.zeros(1)}, 0.0)


class TestLabelSmoothedCE:
    def test_hand_fixture(self):
        loss, grad = label_smoothed_ce(np.array([0.95, 0.05]), 0, 0.1)
        expected = -(0.95 * math.log(0.95) + 0.05 * math.log(0.05))
        assert loss == pytest.approx(expected, abs=1e-9)
        assert loss == pytest.approx(0.198515, abs=5e-7)
        assert np.allclose(grad, np.array([0.95, 0.05]) - np.array([0.95, 0.05]))

    def test_zero_eps_is_plain_ce(self):
        probs = np.array([0.25, 0.5, 0.25])
        loss, grad = label_smoothed_ce(probs, 1, 0.0)
        assert loss == pytest.approx(-math.log(0.5), rel=1e-12)
        assert np.allclose(grad, probs - np.array([0.0, 1.0, 0.0]))

    def test_minimum_is_entropy_of_q(self):
        k, eps = 4, 0.1
        q = np.full(k, eps / k)
        q[2] += 1 - eps
        loss_at_q, _ = label_smoothed_ce(q, 2, eps)
        entropy = -float(np.sum(q * np.log(q)))
        assert loss_at_q == pytest.approx(entropy, rel=1e-12)
        rng = np.random.default_rng(0)
        for _ in range(100):
            direction = rng.normal(size=k)
            direction -= direction.mean()
            perturbed = q + 1e-3 * direction
            if np.any(perturbed <= 0):
                continue
            perturbed /= perturbed.sum()
            loss_p, _ = label_smoothed_ce(perturbed, 2, eps)
            assert loss_p >= loss_at_q - 1e-12

    def test_zero_prob_gives_infinite_loss(self):
        loss, _ = label_smoothed_ce(np.array([1.0, 0.0]), 0, 0.1)
        assert loss == math.inf

    def test_validation(self):
        with pytest.raises(ValueError):
            label_smoothed_ce(np.array([0.5, 0.6]), 0, 0.1)
        with pytest.raises(ValueError):
            label_smoothed_ce(np.array([0.5, 0.5]), 3, 0.1)
        with pytest.raises(ValueError):
            label_smoothed_ce(np.array([0.5, 0.5]), 0, 1.0)


class TestAdam:
    def test_first_step_approximates_lr_times_sign(self):
        params = {"w": np.array([0.0])}
        grads = {"w": np.array([0.5])}
        state = AdamState.init(params)
        adam_step(state, params, grads, lr=0.1, weight_decay=0.0)
        assert params["w"][0] == pytest.approx(-0.1, abs=1e-6)
        assert state.t == 1

    def test_zero_gradient_no_motion(self):
        params = {"w": np.array([1.0, -2.0])}
        state = AdamState.init(params)
        adam_step(state, params, {"w": np.zeros(2)}, lr=0.1, weight_decay=0.0)
        assert np.array_equal(params["w"], np.array([1.0, -2.0]))

    def test_frozen_group_untouched(self):
        params = {"w": np.array([1.0]), "f": np.array([2.0])}
        state = AdamState.init(params)
        adam_step(
            state, params, {"w": np.array([0.5]), "f": np.array([0.5])},
            lr=0.1, weight_decay=0.0, frozen={"f"},
        )
        assert params["f"][0] == 2.0
        assert params["w"][0] != 1.0

    def test_decoupled_decay_and_no_decay_set(self):
        params = {"w": np.array([1.0]), "b": np.array([1.0])}
        state = AdamState.init(params)
        adam_step(
            state, params, {"w": np.zeros(1), "b": np.zeros(1)},
            lr=0.1, weight_decay=0.5, no_decay={"b"},
        )
        assert params["w"][0] == pytest.approx(1.0 * (1 - 0.1 * 0.5), rel=1e-12)
        assert params["b"][0] == 1.0

    def test_shape_mismatch_rejected(self):
        params = {"w": np.zeros(2)}
        state = AdamState.init(params)
        with pytest.raises(ValueError):
            adam_step(state, params, {"w": np.zeros(3)}, lr=0.1)

    def test_matches_reference_formula_over_steps(self):
        rng = np.random.default_rng(1)
        params = {"w": rng.normal(size=5)}
        reference = params["w"].copy()
        state = AdamState.init(params)
        m = np.zeros(5)
        v = np.zeros(5)
        for t in range(1, 8):
            g = rng.normal(size=5)
            adam_step(state, params, {"w": g.copy()}, lr=0.01, weight_decay=0.0)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            m_hat = m / (1 - 0.9**t)
            v_hat = v / (1 - 0.999**t)
            reference -= 0.01 * m_hat / (np.sqrt(v_hat) + 1e-8)
            assert np.allclose(params["w"], reference, atol=1e-12)


class TestAccumulate:
    def test_identical_sets(self):
        g = {"w": np.array([1.0, 2.0])}
        out = accumulate([{k: v.copy() for k, v in g.items()} for _ in range(4)], 4)
        assert np.allclose(out["w"], g["w"])

    def test_symmetric_cancellation(self):
        g = {"w": np.array([1.0, -3.0])}
        neg = {"w": -g["w"]}
        out = accumulate([g, neg, g, neg], 4)
        assert np.allclose(out["w"], 0.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            accumulate([{"w": np.zeros(1)}], 4)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            accumulate([{"w": np.zeros(1)}, {"w": np.zeros(2)}])


class TestLossScaler:
    def test_overflow_halves(self):
        scaler = LossScaler()
        assert scaler.scale == 2**15
        scaler = loss_scaler_update(scaler, overflow=True)
        assert scaler.scale == 2**14
        assert scaler.good_steps == 0

    def test_growth_after_interval(self):
        scaler = LossScaler(scale=float(2**14), growth_interval=2000)
        for _ in range(1999):
            scaler = loss_scaler_update(scaler, overflow=False)
            assert scaler.scale == 2**14
        scaler = loss_scaler_update(scaler, overflow=False)
        assert scaler.scale == 2**15
        assert scaler.good_steps == 0

    def test_alternating_overflow_decays(self):
        scaler = LossScaler(scale=1024.0, growth_interval=4)
        scales = []
        for cycle in range(10):
            scaler = loss_scaler_update(scaler, overflow=True)
            scaler = loss_scaler_update(scaler, overflow=False)
            scales.append(scaler.scale)
        assert all(b < a for a, b in zip(scales, scales[1:]))

    def test_invalid_scale(self):
        with pytest.raises(ValueError):
            LossScaler(scale=0.0)


class TestEarlyStopping:
    def test_spec_trace_stops_after_third_bad_eval(self):
        stopper = EarlyStopping(patience=3)
        outcomes = []
        for step, value in enumerate([5.0, 4.0, 4.1, 4.2, 4.3]):
            outcomes.append(stopper.update(value, step))
        assert outcomes == [False, False, False, False, True]
        assert stopper.best_metric == 4.0
        assert stopper.best_step == 1

    def test_strictly_decreasing_never_stops(self):
        stopper = EarlyStopping(patience=3)
        for step, value in enumerate(np.linspace(10.0, 1.0, 50)):
            assert not stopper.update(float(value), step)

    def test_equal_to_best_counts_as_bad(self):
        stopper = EarlyStopping(patience=2)
        assert not stopper.update(3.0, 0)
        assert not stopper.update(3.0, 1)
        assert stopper.update(3.0, 2)

    def test_functional_wrapper(self):
        stopper = EarlyStopping(patience=1)
        assert early_stop_update(stopper, 2.0) == "continue"
        assert early_stop_update(stopper, 2.5) == "stop"

    def test_nonfinite_metric_rejected(self):
        with pytest.raises(ValueError):
            EarlyStopping().update(float("nan"), 0)

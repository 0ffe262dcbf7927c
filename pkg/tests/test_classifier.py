import math

import numpy as np
import pytest

from cartrec.classifier import (
    ClassifierModel,
    DimMismatch,
    FitConfig,
    KOutOfRange,
    TargetOutOfRange,
    TooFewSamples,
    TrainSample,
    fit,
    forward,
    load_classifier,
    loss,
    mlp_loss,
    mlp_loss_and_grads,
    save_classifier,
    top_k,
)


def zero_model(dims=(4, 5, 3, 20)) -> ClassifierModel:
    d_in, h1, h2, k = dims
    return ClassifierModel(
        weights=(np.zeros((d_in, h1)), np.zeros((h1, h2)), np.zeros((h2, k))),
        biases=(np.zeros(h1), np.zeros(h2), np.zeros(k)),
        label_map=tuple(f"dish-{i}" for i in range(k)),
    )


def random_model(dims, seed) -> ClassifierModel:
    rng = np.random.default_rng(seed)
    weights = tuple(
        rng.normal(0, 1.0, size=(a, b)) for a, b in zip(dims[:-1], dims[1:])
    )
    biases = tuple(rng.normal(0, 0.5, size=b) for b in dims[1:])
    return ClassifierModel(
        weights=weights, biases=biases, label_map=tuple(f"d{i}" for i in range(dims[3]))
    )


def forward_oracle(model: ClassifierModel, x: np.ndarray) -> np.ndarray:
    """Independent straight-line reimplementation of the forward pass."""
    w1, w2, w3 = model.weights
    b1, b2, b3 = model.biases
    h1 = np.array([max(0.0, sum(x[i] * w1[i, j] for i in range(len(x))) + b1[j]) for j in range(w1.shape[1])])
    h2 = np.array([max(0.0, sum(h1[i] * w2[i, j] for i in range(len(h1))) + b2[j]) for j in range(w2.shape[1])])
    logits = np.array([sum(h2[i] * w3[i, j] for i in range(len(h2))) + b3[j] for j in range(w3.shape[1])])
    shifted = logits - max(logits)
    exp = np.array([math.exp(v) for v in shifted])
    return exp / exp.sum()


class TestForward:
    def test_zero_model_uniform(self):
        probs = forward(zero_model(), [1.0, -2.0, 0.5, 3.0])
        np.testing.assert_allclose(probs, np.full(20, 0.05), atol=1e-12)

    def test_crafted_logits_closed_form(self):
        """Logits [ln 2, 0, ..., 0] give first probability 2/(K+1)."""
        k = 20
        model = zero_model((4, 5, 3, k))
        biases = list(model.biases)
        b3 = np.zeros(k)
        b3[0] = math.log(2.0)
        biases[2] = b3
        model = ClassifierModel(model.weights, tuple(biases), model.label_map)
        probs = forward(model, [0.0, 0.0, 0.0, 0.0])
        assert probs[0] == pytest.approx(2 / (k + 1), abs=1e-12)

    def test_matches_straight_line_oracle(self):
        rng = np.random.default_rng(13)
        for seed in range(20):
            model = random_model([6, 7, 5, 4], seed)
            x = rng.normal(0, 1, size=6)
            np.testing.assert_allclose(
                forward(model, x), forward_oracle(model, x), atol=1e-6
            )

    def test_output_is_distribution(self):
        """Sum 1 within 1e-6 and strictly interior probabilities.

        Entries can only saturate to exactly 0/1 when logit gaps exceed
        ~745 in float64; moderate inputs keep the distribution interior.
        """
        rng = np.random.default_rng(3)
        model = random_model([8, 6, 5, 9], 44)
        for _ in range(200):
            probs = forward(model, rng.normal(0, 1, size=8))
            assert abs(probs.sum() - 1.0) < 1e-6
            assert np.all(probs > 0)
            assert np.all(probs < 1)

    def test_extreme_inputs_stay_normalized(self):
        rng = np.random.default_rng(8)
        model = random_model([8, 6, 5, 9], 45)
        for _ in range(50):
            probs = forward(model, rng.normal(0, 100, size=8))
            assert np.all(np.isfinite(probs))
            assert abs(probs.sum() - 1.0) < 1e-6

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            forward(zero_model(), [1.0, 2.0])


class TestLoss:
    def test_perfect_prediction_zero(self):
        p = np.zeros(4)
        p[2] = 1.0
        assert loss(p, 2) == 0.0

    def test_uniform_is_log_k(self):
        assert loss(np.full(20, 0.05), 7) == pytest.approx(math.log(20), abs=1e-12)

    def test_quarter_is_log_4(self):
        p = np.array([0.25, 0.25, 0.25, 0.25])
        assert loss(p, 1) == pytest.approx(math.log(4), abs=1e-12)

    def test_target_out_of_range(self):
        with pytest.raises(TargetOutOfRange):
            loss(np.full(4, 0.25), 4)

    def test_floor_prevents_infinity(self):
        p = np.array([1.0, 0.0, 0.0])
        assert loss(p, 1) == pytest.approx(-math.log(1e-12))


class TestGradients:
    """Backprop gradients against central finite differences, double precision."""

    def test_matches_central_finite_differences(self):
        eps = 1e-4
        dims = [4, 5, 3, 3]
        checked = 0
        for seed in range(8):
            rng = np.random.default_rng(seed)
            weights = [
                rng.normal(0, 0.5, size=(a, b)) for a, b in zip(dims[:-1], dims[1:])
            ]
            biases = [rng.normal(0, 0.5, size=b) for b in dims[1:]]
            X = rng.normal(0, 1, size=(6, 4))
            y = rng.integers(0, 3, size=6)
            # keep clear of the loss floor: a floored sample's objective is
            # locally flat and finite differences would read zero there
            from cartrec.classifier import _forward_batch

            probs, _ = _forward_batch(weights, biases, X)
            assert probs[np.arange(len(y)), y].min() > 1e-9
            _, g_w, g_b = mlp_loss_and_grads(weights, biases, X, y)
            for _ in range(16):
                layer = int(rng.integers(0, 3))
                if rng.random() < 0.75:
                    i = int(rng.integers(0, weights[layer].shape[0]))
                    j = int(rng.integers(0, weights[layer].shape[1]))
                    target, grad = weights[layer], g_w[layer][i, j]
                    idx = (i, j)
                else:
                    idx = (int(rng.integers(0, biases[layer].shape[0])),)
                    target, grad = biases[layer], g_b[layer][idx]
                keep = target[idx]
                target[idx] = keep + eps
                up = mlp_loss(weights, biases, X, y)
                target[idx] = keep - eps
                down = mlp_loss(weights, biases, X, y)
                target[idx] = keep
                fd = (up - down) / (2 * eps)
                rel = abs(grad - fd) / max(abs(grad), abs(fd), 1e-8)
                assert rel < 1e-4, f"seed {seed} layer {layer} idx {idx}: rel {rel}"
                checked += 1
        assert checked >= 100


def separable_samples(n=120, seed=5) -> list[TrainSample]:
    """Two well-separated Gaussian blobs; K=2."""
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n):
        target = int(rng.integers(0, 2))
        center = np.array([3.0, 3.0]) if target == 1 else np.array([-3.0, -3.0])
        samples.append(TrainSample(center + rng.normal(0, 0.3, size=2), target))
    return samples


class TestFit:
    def test_separable_converges(self):
        samples = separable_samples()
        model, curves = fit(
            samples, dims=[2, 8, 4, 2], config=FitConfig(epochs=300, batch_size=8, seed=1)
        )
        assert curves["train"][-1] < 0.1
        correct = sum(
            int(np.argmax(forward(model, s.input)) == s.target) for s in samples
        )
        assert correct == len(samples)

    def test_deterministic(self):
        samples = separable_samples()
        m1, c1 = fit(samples, [2, 8, 4, 2], FitConfig(epochs=3, seed=7))
        m2, c2 = fit(samples, [2, 8, 4, 2], FitConfig(epochs=3, seed=7))
        for a, b in zip(m1.weights, m2.weights):
            np.testing.assert_array_equal(a, b)
        for a, b in zip(m1.biases, m2.biases):
            np.testing.assert_array_equal(a, b)
        assert c1 == c2

    def test_loss_curve_decreases(self):
        samples = separable_samples(200, seed=9)
        _, curves = fit(samples, [2, 8, 4, 2], FitConfig(epochs=10, seed=2))
        assert curves["train"][-1] < curves["train"][0]
        assert len(curves["train"]) == len(curves["test"]) == 10
        assert all(v is not None for v in curves["test"])

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            fit(separable_samples(9), [2, 8, 4, 2])

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            fit(separable_samples(), [3, 8, 4, 2])

    def test_no_nan_parameters(self):
        rng = np.random.default_rng(11)
        samples = [
            TrainSample(rng.normal(0, 50, size=4), int(rng.integers(0, 3)))
            for _ in range(100)
        ]
        model, _ = fit(samples, [4, 6, 5, 3], FitConfig(epochs=5, seed=3))
        for arr in (*model.weights, *model.biases):
            assert np.all(np.isfinite(arr))


class TestTopK:
    def test_uniform_ties_break_by_index(self):
        got = top_k(zero_model(), [0.0, 0.0, 0.0, 0.0], 4)
        assert [i for i, _ in got] == [0, 1, 2, 3]

    def test_dominant_logit_first(self):
        k = 20
        model = zero_model((4, 5, 3, k))
        biases = list(model.biases)
        b3 = np.zeros(k)
        b3[13] = 10.0
        biases[2] = b3
        model = ClassifierModel(model.weights, tuple(biases), model.label_map)
        assert top_k(model, [0.0] * 4, 1)[0][0] == 13

    def test_matches_full_sort_oracle(self):
        rng = np.random.default_rng(21)
        for seed in range(30):
            model = random_model([5, 6, 4, 9], seed + 200)
            x = rng.normal(0, 1, size=5)
            probs = forward(model, x)
            oracle = sorted(range(9), key=lambda i: (-probs[i], i))[:4]
            assert [i for i, _ in top_k(model, x, 4)] == oracle

    def test_shift_invariance(self):
        """Adding a constant to all logits must not change the ordering."""
        rng = np.random.default_rng(31)
        for seed in range(10):
            model = random_model([4, 5, 3, 6], seed + 300)
            x = rng.normal(0, 1, size=4)
            base = [i for i, _ in top_k(model, x, 6)]
            biases = list(model.biases)
            biases[2] = biases[2] + 7.5
            shifted_model = ClassifierModel(model.weights, tuple(biases), model.label_map)
            shifted = [i for i, _ in top_k(shifted_model, x, 6)]
            assert base == shifted

    def test_k_out_of_range(self):
        model = zero_model()
        with pytest.raises(KOutOfRange):
            top_k(model, [0.0] * 4, 0)
        with pytest.raises(KOutOfRange):
            top_k(model, [0.0] * 4, 21)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        model, _ = fit(separable_samples(), [2, 8, 4, 2], FitConfig(epochs=2, seed=4))
        path = tmp_path / "classifier.bin"
        save_classifier(model, path)
        loaded = load_classifier(path)
        assert loaded.label_map == model.label_map
        assert loaded.dims == model.dims
        for a, b in zip(loaded.weights, model.weights):
            np.testing.assert_array_equal(a, b.astype(np.float32).astype(np.float64))
        # a reloaded model predicts the same top classes
        x = np.array([2.9, 3.1])
        assert [i for i, _ in top_k(loaded, x, 2)] == [i for i, _ in top_k(model, x, 2)]

    def test_magic_checked(self, tmp_path):
        path = tmp_path / "bogus.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(ValueError):
            load_classifier(path)

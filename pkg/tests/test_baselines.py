import numpy as np
import pytest

from cytorules.baselines import (
    BaselineConfig,
    LinearModel,
    Standardizer,
    hinge_loss_grad,
    load_baseline,
    logistic_loss_grad,
    mlp_loss_grads,
    predict_baseline,
    save_baseline,
    train_linear_svm,
    train_logistic,
    train_mlp,
)
from cytorules.errors import DegenerateLabels


def separable_1d(n=40, seed=0):
    rng = np.random.default_rng(seed)
    x = np.concatenate([rng.uniform(-3, -1, n // 2), rng.uniform(1, 3, n // 2)])[:, None]
    y = (x[:, 0] > 0).astype(float)
    return x, y


class TestLogistic:
    def test_separable_training_accuracy(self):
        x, y = separable_1d()
        model = train_logistic(x, y)
        assert np.mean(predict_baseline(model, x) == y) == 1.0

    def test_flipped_labels_negate_weights(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(60, 5))
        y = (x @ rng.normal(size=5) > 0).astype(float)
        a = train_logistic(x, y)
        b = train_logistic(x, 1.0 - y)
        assert np.abs(a.weights + b.weights).max() < 1e-9
        assert abs(a.bias + b.bias) < 1e-9

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            n, d = int(rng.integers(5, 30)), int(rng.integers(2, 8))
            x = rng.normal(size=(n, d))
            y = rng.integers(0, 2, size=n).astype(float)
            w = rng.normal(size=d)
            b = float(rng.normal())
            l2 = 1e-3
            _, gw, gb = logistic_loss_grad(w, b, x, y, l2)
            h = 1e-6
            fd_w = np.zeros(d)
            for j in range(d):
                up, dn = w.copy(), w.copy()
                up[j] += h
                dn[j] -= h
                fd_w[j] = (
                    logistic_loss_grad(up, b, x, y, l2)[0] - logistic_loss_grad(dn, b, x, y, l2)[0]
                ) / (2 * h)
            fd_b = (
                logistic_loss_grad(w, b + h, x, y, l2)[0] - logistic_loss_grad(w, b - h, x, y, l2)[0]
            ) / (2 * h)
            scale = max(np.abs(fd_w).max(), abs(fd_b), 1e-12)
            assert np.abs(gw - fd_w).max() / scale < 1e-5
            assert abs(gb - fd_b) / scale < 1e-5


class TestLinearSvm:
    def test_separable_training_accuracy(self):
        x, y = separable_1d(seed=3)
        model = train_linear_svm(x, y)
        assert np.mean(predict_baseline(model, x) == y) == 1.0
        y_pm = np.where(y > 0.5, 1.0, -1.0)
        margins = y_pm * model.score(x)
        assert np.all(margins > 0)

    def test_small_c_shrinks_weights(self):
        x, y = separable_1d(seed=4)
        big = train_linear_svm(x, y, BaselineConfig(svm_c=1.0))
        tiny = train_linear_svm(x, y, BaselineConfig(svm_c=1e-4))
        assert np.linalg.norm(tiny.weights) < 0.05 * np.linalg.norm(big.weights)

    def test_matches_grid_search_on_2d_toy(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(80, 2))
        score = x[:, 0] + 0.5 * x[:, 1] - 0.2
        keep = np.abs(score) > 0.3  # margin gap so the hinge optimum separates
        x, score = x[keep], score[keep]
        y = (score > 0).astype(float)
        model = train_linear_svm(x, y, BaselineConfig(svm_c=10.0))
        trained_acc = np.mean(predict_baseline(model, x) == y)
        xs = model.scaler.transform(x)
        best = 0.0
        for w0 in np.linspace(-2, 2, 21):
            for w1 in np.linspace(-2, 2, 21):
                for b in np.linspace(-2, 2, 21):
                    pred = (xs @ np.array([w0, w1]) + b >= 0).astype(float)
                    best = max(best, float(np.mean(pred == y)))
        assert trained_acc >= best - 0.02

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        hits = 0
        for _ in range(25):
            n, d = int(rng.integers(10, 30)), int(rng.integers(2, 6))
            x = rng.normal(size=(n, d))
            y_pm = np.where(rng.random(n) > 0.5, 1.0, -1.0)
            w = rng.normal(size=d)
            b = float(rng.normal())
            margins = 1.0 - y_pm * (x @ w + b)
            if np.abs(margins).min() < 1e-3:
                continue  # skip instances near the hinge kink
            _, gw, gb = hinge_loss_grad(w, b, x, y_pm, 1.0)
            h = 1e-7
            fd_w = np.zeros(d)
            for j in range(d):
                up, dn = w.copy(), w.copy()
                up[j] += h
                dn[j] -= h
                fd_w[j] = (
                    hinge_loss_grad(up, b, x, y_pm, 1.0)[0] - hinge_loss_grad(dn, b, x, y_pm, 1.0)[0]
                ) / (2 * h)
            assert np.abs(gw - fd_w).max() / max(np.abs(fd_w).max(), 1e-12) < 1e-5
            hits += 1
        assert hits >= 15


class TestMlp:
    def test_xor_capacity(self):
        rng = np.random.default_rng(7)
        x = rng.integers(0, 2, size=(200, 2)).astype(float)
        y = (x[:, 0] != x[:, 1]).astype(float)
        x += rng.normal(0, 0.05, size=x.shape)
        cfg = BaselineConfig(epochs=800, learning_rate=0.5, lr_decay=0.001, batch_size=16, seed=0)
        model = train_mlp(x, y, cfg)
        assert np.mean(predict_baseline(model, x) == y) >= 0.95

    def test_zero_init_zero_epochs_predicts_half(self):
        x, y = separable_1d(seed=8)
        cfg = BaselineConfig(epochs=0, init_scale=0.0)
        model = train_mlp(x, y, cfg)
        assert np.allclose(model.probability(x), 0.5)

    def test_backprop_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            n, d = int(rng.integers(4, 16)), int(rng.integers(2, 6))
            x = rng.normal(size=(n, d))
            y = rng.integers(0, 2, size=n).astype(float)
            params = {
                "w1": rng.normal(size=(8, d)) * 0.5,
                "b1": rng.normal(size=8) * 0.1,
                "w2": rng.normal(size=8) * 0.5,
                "b2": float(rng.normal()),
            }
            _, grads = mlp_loss_grads(params, x, y)
            h = 1e-6

            def loss_at(name, idx, delta):
                p = {k: np.array(v, dtype=float, copy=True) if np.ndim(v) else v for k, v in params.items()}
                if np.ndim(p[name]):
                    p[name][idx] += delta
                else:
                    p[name] = p[name] + delta
                return mlp_loss_grads(p, x, y)[0]

            worst = 0.0
            for name in ("w1", "b1", "w2"):
                flat = params[name]
                it = np.ndindex(flat.shape)
                for idx in it:
                    fd = (loss_at(name, idx, h) - loss_at(name, idx, -h)) / (2 * h)
                    worst = max(worst, abs(grads[name][idx] - fd))
            fd_b2 = (loss_at("b2", None, h) - loss_at("b2", None, -h)) / (2 * h)
            worst = max(worst, abs(grads["b2"] - fd_b2))
            scale = max(max(np.abs(g).max() for g in (grads["w1"], grads["b1"], grads["w2"])), 1e-12)
            assert worst / scale < 1e-4

    def test_deterministic_given_seed(self):
        x, y = separable_1d(seed=10)
        cfg = BaselineConfig(epochs=50, seed=11)
        a = train_mlp(x, y, cfg)
        b = train_mlp(x, y, cfg)
        assert np.array_equal(a.w1, b.w1) and np.array_equal(a.w2, b.w2)


class TestPredict:
    def test_positive_score(self):
        model = LinearModel(weights=np.array([1.0]), bias=0.0, kind="logistic")
        assert predict_baseline(model, np.array([0.7])) == 1

    def test_threshold_is_inclusive(self):
        model = LinearModel(weights=np.array([1.0]), bias=0.0, kind="hinge")
        assert predict_baseline(model, np.array([0.0])) == 1

    def test_negated_weights_flip_predictions(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=(30, 4))
        w = rng.normal(size=4)
        a = LinearModel(weights=w, bias=0.3, kind="logistic")
        b = LinearModel(weights=-w, bias=-0.3, kind="logistic")
        pa = predict_baseline(a, x)
        pb = predict_baseline(b, x)
        boundary = a.score(x) == 0.0
        assert np.all((pa != pb) | boundary)


class TestStandardization:
    def test_test_transform_uses_train_statistics_exactly(self):
        rng = np.random.default_rng(13)
        train = rng.normal(loc=5.0, scale=3.0, size=(50, 4))
        test = rng.normal(loc=-2.0, scale=0.5, size=(20, 4))
        scaler = Standardizer.fit(train)
        expected = (test - train.mean(axis=0)) / train.std(axis=0)
        assert np.array_equal(scaler.transform(test), expected)

    def test_trained_models_carry_train_scaler(self):
        x, y = separable_1d(seed=14)
        model = train_logistic(x, y)
        assert np.allclose(model.scaler.mean, x.mean(axis=0))

    def test_constant_column_guard(self):
        x = np.ones((10, 2))
        x[:, 1] = np.arange(10.0)
        scaler = Standardizer.fit(x)
        out = scaler.transform(x)
        assert np.all(np.isfinite(out))
        assert np.all(out[:, 0] == 0.0)


def test_degenerate_labels_raise():
    x = np.zeros((10, 2))
    for trainer in (train_logistic, train_linear_svm, train_mlp):
        with pytest.raises(DegenerateLabels):
            trainer(x, np.ones(10))


def test_baseline_serialization_round_trip(tmp_path):
    x, y = separable_1d(seed=15)
    for trainer, name in ((train_logistic, "lr"), (train_linear_svm, "svm"), (train_mlp, "mlp")):
        model = trainer(x, y, BaselineConfig(epochs=30))
        path = tmp_path / f"{name}.json"
        save_baseline(model, path)
        again = load_baseline(path)
        assert np.array_equal(predict_baseline(again, x), predict_baseline(model, x))

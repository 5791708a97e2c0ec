import numpy as np
import pytest

from tiersim.classify import (
    CLASS_LABELS,
    FALL_CLASS,
    LearnConfig,
    LinearModel,
    MlpModel,
    OutputKind,
    WindowSpec,
    adaline_error,
    linear_forward,
    lms_update,
    load_model,
    mlp_forward,
    mlp_gradients,
    mlp_train_step,
    new_linear,
    new_mlp,
    one_hot,
    perceptron_update,
    save_model,
    train_lms,
    train_mlp,
    train_perceptron,
    windows,
)
from tiersim.errors import DataError, DimError
from tiersim.trace import AccelSample, Label, Trace, TraceSpec, generate_trace

AND = [((0.0, 0.0), 0), ((0.0, 1.0), 0), ((1.0, 0.0), 0), ((1.0, 1.0), 1)]
OR = [((0.0, 0.0), 0), ((0.0, 1.0), 1), ((1.0, 0.0), 1), ((1.0, 1.0), 1)]
XOR = [((0.0, 0.0), 0), ((0.0, 1.0), 1), ((1.0, 0.0), 1), ((1.0, 1.0), 0)]


def oracle_perceptron_epochs(dataset, max_epochs=1000):
    """Literal re-implementation of the update rule, used as the oracle."""
    w = np.zeros(2)
    b = 0.0
    for epoch in range(1, max_epochs + 1):
        errors = 0
        for x, t in dataset:
            x = np.asarray(x, float)
            y = 1 if (w @ x + b) >= 0 else 0
            if y != t:
                errors += 1
                w = w + (t - y) * x
                b = b + (t - y)
        if errors == 0:
            return epoch
    return None


class TestLinearForward:
    def test_positive_sum(self):
        model = LinearModel(np.array([1.0, 1.0]), -1.5, OutputKind.HEAVISIDE)
        y, s = linear_forward(model, (1.0, 1.0))
        assert (y, s) == (1, pytest.approx(0.5))

    def test_zero_boundary_maps_to_one(self):
        model = LinearModel(np.array([0.0, 0.0]), 0.0, OutputKind.HEAVISIDE)
        y, s = linear_forward(model, (1.0, 0.0))
        assert (y, s) == (1, 0.0)

    def test_sign_output(self):
        model = LinearModel(np.array([1.0]), 0.0, OutputKind.SIGN)
        assert linear_forward(model, (-0.2,))[0] == -1
        assert linear_forward(model, (0.0,))[0] == 1

    def test_dim_mismatch(self):
        model = LinearModel(np.array([1.0, 1.0]), 0.0, OutputKind.HEAVISIDE)
        with pytest.raises(DimError):
            linear_forward(model, (1.0,))


class TestPerceptron:
    def test_single_update(self):
        model = LinearModel(np.array([0.0, 0.0]), 0.0, OutputKind.HEAVISIDE)
        updated = perceptron_update(model, (1.0, 0.0), 0)  # y=1 at the boundary
        assert updated.weights.tolist() == [-1.0, 0.0]
        assert updated.bias == -1.0

    def test_no_change_when_correct(self):
        model = LinearModel(np.array([1.0, 0.0]), -0.5, OutputKind.HEAVISIDE)
        updated = perceptron_update(model, (1.0, 0.0), 1)
        assert updated is model

    def test_and_converges_like_oracle(self):
        expected_epochs = oracle_perceptron_epochs(AND)
        assert expected_epochs is not None and expected_epochs <= 30
        model, history = train_perceptron(new_linear(2, OutputKind.HEAVISIDE), AND)
        assert history[-1] == 0
        assert len(history) == expected_epochs
        for x, t in AND:
            assert linear_forward(model, x)[0] == t

    def test_or_converges_like_oracle(self):
        expected_epochs = oracle_perceptron_epochs(OR)
        model, history = train_perceptron(new_linear(2, OutputKind.HEAVISIDE), OR)
        assert history[-1] == 0
        assert len(history) == expected_epochs

    def test_xor_never_converges(self):
        assert oracle_perceptron_epochs(XOR) is None
        _, history = train_perceptron(new_linear(2, OutputKind.HEAVISIDE), XOR, max_epochs=1000)
        assert len(history) == 1000
        assert min(history) > 0

    def test_separable_datasets_converge(self):
        """Random 2-D datasets with margin >= 0.1 around a random separator."""
        rng = np.random.default_rng(7)
        for _ in range(10):
            direction = rng.normal(size=2)
            direction /= np.linalg.norm(direction)
            offset = rng.uniform(-0.5, 0.5)
            dataset = []
            while len(dataset) < 30:
                x = rng.uniform(-2, 2, size=2)
                s = direction @ x + offset
                if abs(s) >= 0.1:
                    dataset.append((tuple(x), 1 if s > 0 else 0))
            _, history = train_perceptron(new_linear(2, OutputKind.HEAVISIDE), dataset, 1000)
            assert history[-1] == 0

    def test_requires_heaviside(self):
        model = LinearModel(np.array([0.0]), 0.0, OutputKind.SIGN)
        with pytest.raises(ValueError, match="HEAVISIDE"):
            perceptron_update(model, (1.0,), 1)


class TestAdaline:
    def test_error_single_pattern(self):
        model = LinearModel(np.array([1.0]), 0.0, OutputKind.SIGN)
        assert adaline_error([((1.0,), -1.0)], model) == pytest.approx(4.0)  # (1-(-1))^2

    def test_error_zero_when_exact(self):
        model = LinearModel(np.array([1.0]), 0.0, OutputKind.SIGN)
        dataset = [((1.0,), 1.0), ((-1.0,), -1.0)]
        assert adaline_error(dataset, model) == 0.0

    def test_error_two_patterns(self):
        # residuals 1 and 3 -> (1 + 9) / 2 = 5
        model = LinearModel(np.array([1.0]), 0.0, OutputKind.SIGN)
        dataset = [((2.0,), 1.0), ((4.0,), 1.0)]
        assert adaline_error(dataset, model) == pytest.approx(5.0)

    def test_error_non_negative(self):
        rng = np.random.default_rng(3)
        model = LinearModel(rng.normal(size=3), 0.1, OutputKind.SIGN)
        dataset = [(tuple(rng.normal(size=3)), float(rng.choice([-1, 1]))) for _ in range(20)]
        assert adaline_error(dataset, model) >= 0.0

    def test_empty_dataset(self):
        model = LinearModel(np.array([1.0]), 0.0, OutputKind.SIGN)
        with pytest.raises(DataError):
            adaline_error([], model)

    def test_lms_single_update(self):
        model = LinearModel(np.array([0.5]), 0.0, OutputKind.SIGN)
        updated = lms_update(model, (1.0,), 1.0, eta=0.1)  # s = 0.5, residual 0.5
        assert updated.weights.tolist() == [pytest.approx(0.55)]
        assert updated.bias == pytest.approx(0.05)

    def test_lms_no_change_at_zero_residual(self):
        model = LinearModel(np.array([1.0]), 0.0, OutputKind.SIGN)
        updated = lms_update(model, (1.0,), 1.0, eta=0.1)
        assert updated.weights.tolist() == [1.0]
        assert updated.bias == 0.0

    def test_lms_epoch_decreases_q(self):
        """Oracle recomputes Q via adaline_error before and after one epoch."""
        rng = np.random.default_rng(20)
        dataset = []
        for _ in range(20):
            x = rng.uniform(-1, 1, size=2)
            t = 1.0 if x[0] + 0.5 * x[1] + 0.2 > 0 else -1.0
            dataset.append((tuple(x), t))
        model = new_linear(2, OutputKind.SIGN, seed=1)
        q_before = adaline_error(dataset, model)
        trained, _ = train_lms(model, dataset, LearnConfig(eta=0.01, max_epochs=1))
        q_after = adaline_error(dataset, trained)
        assert q_after < q_before

    def test_lms_batch_accumulation(self):
        # two-pattern batch: deltas evaluated at the batch-start weights
        dataset = [((1.0,), 1.0), ((2.0,), -1.0)]
        model = LinearModel(np.array([0.0]), 0.0, OutputKind.SIGN)
        trained, _ = train_lms(model, dataset, LearnConfig(eta=0.1, batch=2, max_epochs=1))
        # residuals at start: 1 - 0 = 1 and -1 - 0 = -1
        # dw = 0.1*1*1 + 0.1*(-1)*2 = -0.1 ; db = 0.1*1 + 0.1*(-1) = 0
        assert trained.weights.tolist() == [pytest.approx(-0.1)]
        assert trained.bias == pytest.approx(0.0)


class TestMlpForward:
    def test_zero_weights_give_half(self):
        model = MlpModel(np.zeros((4, 3)), np.zeros(4), np.zeros((2, 4)), np.zeros(2))
        out = mlp_forward(model, (0.3, -0.2, 5.0))
        assert out.tolist() == [0.5, 0.5]

    def test_111_hand_evaluation(self):
        model = MlpModel(np.ones((1, 1)), np.zeros(1), np.ones((1, 1)), np.zeros(1))
        out = mlp_forward(model, (0.0,))
        assert out[0] == pytest.approx(0.62246, abs=1e-5)  # sigmoid(sigmoid(0))

    def test_outputs_in_open_unit_interval(self):
        rng = np.random.default_rng(5)
        for seed in range(5):
            model = new_mlp(4, 6, 3, seed=seed)
            for _ in range(10):
                out = mlp_forward(model, rng.normal(scale=20, size=4))
                assert np.all(out > 0.0) and np.all(out < 1.0)

    def test_dim_mismatch(self):
        model = new_mlp(3, 4, 2, seed=0)
        with pytest.raises(DimError):
            mlp_forward(model, (1.0, 2.0))


class TestMlpTraining:
    def test_zero_eta_is_noop_with_error(self):
        model = new_mlp(2, 3, 1, seed=2)
        updated, error = mlp_train_step(model, (0.5, -0.5), (1.0,), eta=0.0)
        assert updated is model
        assert error > 0.0

    @pytest.mark.parametrize("shape", [(2, 3, 1), (3, 4, 2), (5, 6, 3), (1, 2, 1)])
    def test_gradients_match_finite_differences(self, shape):
        """Central finite differences (h = 1e-5) as the independent oracle."""
        n, h_units, k = shape
        rng = np.random.default_rng(hash(shape) % 2**32)
        model = new_mlp(n, h_units, k, seed=9)
        x = rng.normal(size=n)
        t = rng.uniform(0.1, 0.9, size=k)
        grads, _ = mlp_gradients(model, x, t)

        def error_at(m):
            y = mlp_forward(m, x)
            return float(np.sum((y - t) ** 2))

        h = 1e-5
        arrays = ("w_hidden", "b_hidden", "w_out", "b_out")
        for name, grad in zip(arrays, grads):
            base = getattr(model, name)
            fd = np.zeros_like(base)
            for idx in np.ndindex(base.shape):
                bumped = base.copy()
                bumped[idx] = base[idx] + h
                plus = error_at(MlpModel(**{**{a: getattr(model, a) for a in arrays}, name: bumped}))
                bumped[idx] = base[idx] - h
                minus = error_at(MlpModel(**{**{a: getattr(model, a) for a in arrays}, name: bumped}))
                fd[idx] = (plus - minus) / (2 * h)
            scale = np.maximum(np.abs(fd), 1e-8)
            assert np.max(np.abs(grad - fd) / scale) < 1e-4

    def test_xor_training(self):
        """Seeded run; the oracle in the module docstring recorded 649 epochs."""
        dataset = [(np.array(x), np.array([float(t)])) for x, t in XOR]
        model = new_mlp(2, 2, 1, seed=0)
        trained, history = train_mlp(
            model, dataset, LearnConfig(eta=0.5, max_epochs=20_000, target_error=0.05, seed=0)
        )
        assert history[-1] < 0.05
        assert len(history) <= 20_000
        assert len(history) == 649  # deterministic for seed 0
        for x, t in XOR:
            assert round(float(mlp_forward(trained, np.array(x))[0])) == t

    def test_training_determinism(self):
        dataset = [(np.array(x), np.array([float(t)])) for x, t in XOR]
        runs = []
        for _ in range(2):
            model = new_mlp(2, 2, 1, seed=3)
            trained, _ = train_mlp(
                model, dataset, LearnConfig(eta=0.5, max_epochs=200, seed=3)
            )
            runs.append(trained)
        assert np.array_equal(runs[0].w_hidden, runs[1].w_hidden)
        assert np.array_equal(runs[0].b_hidden, runs[1].b_hidden)
        assert np.array_equal(runs[0].w_out, runs[1].w_out)
        assert np.array_equal(runs[0].b_out, runs[1].b_out)

    def test_seeded_init_determinism(self):
        a = new_mlp(3, 5, 2, seed=11)
        b = new_mlp(3, 5, 2, seed=11)
        assert np.array_equal(a.w_hidden, b.w_hidden)
        assert np.array_equal(a.b_out, b.b_out)
        c = new_mlp(3, 5, 2, seed=12)
        assert not np.array_equal(a.w_hidden, c.w_hidden)

    def test_init_range(self):
        model = new_mlp(10, 10, 10, seed=4)
        for arr in (model.w_hidden, model.b_hidden, model.w_out, model.b_out):
            assert np.all(arr >= -0.5) and np.all(arr <= 0.5)


def trace_of_labels(labels):
    samples = []
    for i, label in enumerate(labels):
        mag = {"REST": 1.0, "WALK": 4.0, "FALL": 9.0}[label]
        samples.append(AccelSample(i * 81, 0.0, 0.0, float(np.sqrt(mag)), Label(label)))
    return Trace(80.59, tuple(samples))


class TestWindows:
    def test_count_non_overlapping(self):
        trace = trace_of_labels(["REST"] * 10)
        assert len(windows(trace, WindowSpec(width=4))) == 2  # floor((10-4)/4)+1

    def test_count_with_stride(self):
        trace = trace_of_labels(["REST"] * 10)
        assert len(windows(trace, WindowSpec(width=4, stride=2))) == 4

    def test_majority_label(self):
        trace = trace_of_labels(["REST", "REST", "REST", "WALK"])
        assert windows(trace, WindowSpec(width=4))[0][1] is Label.REST

    def test_fall_dominates_tie(self):
        trace = trace_of_labels(["REST", "REST", "FALL", "FALL"])
        assert windows(trace, WindowSpec(width=4))[0][1] is Label.FALL

    def test_feature_is_magnitude_sq(self):
        trace = trace_of_labels(["REST", "WALK", "FALL"])
        vec, label = windows(trace, WindowSpec(width=3))[0]
        assert vec == pytest.approx([1.0, 4.0, 9.0])
        assert label is Label.FALL  # three-way tie resolves to FALL

    def test_raw_axes_feature(self):
        trace = trace_of_labels(["REST", "WALK"])
        spec = WindowSpec(width=2, raw_axes=True)
        vec, _ = windows(trace, spec)[0]
        assert vec.shape == (6,)
        assert spec.n_inputs == 6

    def test_short_trace_rejected(self):
        trace = trace_of_labels(["REST", "REST"])
        with pytest.raises(DataError):
            windows(trace, WindowSpec(width=3))

    def test_generated_trace_window_count(self):
        spec = TraceSpec(duration_min=1.0)
        trace = generate_trace(spec, 1)
        wins = windows(trace, WindowSpec(width=5, stride=3))
        assert len(wins) == (len(trace) - 5) // 3 + 1


class TestModelFiles:
    def test_linear_round_trip(self, tmp_path):
        model = LinearModel(np.array([0.1234567890123456, -2.5]), 0.75, OutputKind.SIGN)
        path = tmp_path / "lin.model"
        save_model(model, path)
        loaded = load_model(path)
        assert isinstance(loaded, LinearModel)
        assert np.array_equal(loaded.weights, model.weights)
        assert loaded.bias == model.bias
        assert loaded.output_kind is model.output_kind

    def test_mlp_round_trip(self, tmp_path):
        model = new_mlp(4, 7, 3, seed=13)
        path = tmp_path / "net.model"
        save_model(model, path)
        loaded = load_model(path)
        assert np.array_equal(loaded.w_hidden, model.w_hidden)
        assert np.array_equal(loaded.b_hidden, model.b_hidden)
        assert np.array_equal(loaded.w_out, model.w_out)
        assert np.array_equal(loaded.b_out, model.b_out)

    def test_one_hot_order(self):
        assert CLASS_LABELS[FALL_CLASS] is Label.FALL
        assert one_hot(FALL_CLASS).tolist() == [0.0, 0.0, 1.0]

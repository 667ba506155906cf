import numpy as np
import pytest
from hypothesis import given, strategies as st

from neurovid import autodiff as ad
from neurovid.autodiff import ShapeError, Tensor
from neurovid.generative import (
    GenerativeModel,
    GeneratorSpec,
    Projection,
    count_params,
    count_params_by_scale,
    project_frame,
)

PUBLISHED_COUNTS = {
    ("benchmark", 64): 4_123_266, ("multi_res_layers", 64): 4_123_524, ("multi_res_lstm", 64): 8_265_732,
    ("benchmark", 128): 15_619_330, ("multi_res_layers", 128): 15_619_844, ("multi_res_lstm", 128): 31_277_060,
}


@pytest.mark.parametrize("kind,c", list(PUBLISHED_COUNTS))
def test_published_counts(kind, c):
    assert count_params(GeneratorSpec(kind, (c, c), 19, 19)) == PUBLISHED_COUNTS[kind, c]


def test_multi_res_lstm_scale_split():
    by_scale = count_params_by_scale(GeneratorSpec("mrlstm", (64, 64), 19, 19))
    assert by_scale == {"scale1": 4_123_266, "scale0": 4_142_466}


@given(st.integers(1, 200))
def test_count_deltas(c):
    bench = count_params(GeneratorSpec("benchmark", (c, c), 19, 19))
    layers = count_params(GeneratorSpec("mrlayer", (c, c), 19, 19))
    scale0 = count_params_by_scale(GeneratorSpec("mrlstm", (c, c), 19, 19))["scale0"]
    assert layers - bench == 2 * (2 * c + 1)
    assert scale0 - bench == 3 * 4 * 25 * c


@pytest.mark.parametrize("kind", ["benchmark", "mrlstm", "mrlayer"])
def test_closed_form_equals_instantiated(kind):
    spec = GeneratorSpec(kind, (3, 2), 5, 4, t=4, n=4)
    assert GenerativeModel(spec).count() == count_params(spec)


def test_projection_examples(f64):
    zero = Projection(Tensor(np.zeros((1, 4, 1, 1))), Tensor(np.zeros(1)))
    assert not np.any(project_frame(Tensor(np.ones((2, 4, 3, 3))), zero).data)
    one = Projection(Tensor(np.array([1.0, 0, 0, 0]).reshape(1, 4, 1, 1)), Tensor(np.zeros(1)))
    out = project_frame(Tensor(np.full((1, 4, 2, 2), 0.5)), one)
    np.testing.assert_allclose(out.data, np.tanh(0.5))
    assert Projection.initialize(128, 1, np.random.default_rng(0)).weight.size + 1 == 129
    with pytest.raises(ShapeError):
        project_frame(Tensor(np.ones((1, 3, 2, 2))), one)


def _zero(model):
    for p in model.parameters():
        p.data[...] = 0.0
    return model


def _obs(rng, t, shape=(2, 1, 4, 5)):
    return [Tensor(rng.uniform(-1, 1, size=shape)) for _ in range(t)]


@pytest.mark.parametrize("kind", ["benchmark", "mrlstm", "mrlayer"])
def test_zero_weight_models_predict_zero(f64, kind):
    model = _zero(GenerativeModel(GeneratorSpec(kind, (2, 2), 4, 5, t=4, n=4)))
    out = model(_obs(np.random.default_rng(0), 4), n=4)
    assert all(not np.any(f.data) for f in out.predictions + out.reconstructions)
    if out.coarse is not None:
        assert all(not np.any(f.data) for f in out.coarse.predictions)


@pytest.mark.parametrize("kind,t,n", [("benchmark", 3, 5), ("mrlayer", 5, 2), ("mrlstm", 4, 6), ("mrlstm", 16, 16)])
def test_frame_counts_and_range(f64, kind, t, n):
    model = GenerativeModel(GeneratorSpec(kind, (3, 3), 4, 5, t=t, n=n), seed=1)
    out = model(_obs(np.random.default_rng(1), t), n=n)
    assert len(out.reconstructions) == t and len(out.predictions) == n
    assert all(f.shape == (2, 1, 4, 5) for f in out.predictions)
    assert all(np.all(np.abs(f.data) < 1) for f in out.predictions)
    if kind == "mrlstm":
        assert len(out.coarse.predictions) == n // 2
        assert len(out.coarse.reconstructions) == t // 2


def test_upper_layer_schedule(f64):
    for t, n in [(4, 4), (16, 16), (6, 2)]:
        model = GenerativeModel(GeneratorSpec("mrlayer", (2, 2), 3, 3, t=t, n=n))
        out = model(_obs(np.random.default_rng(2), t, (1, 1, 3, 3)), n=n)
        assert out.upper_steps["encoder"] + out.upper_steps["predictor"] == -(-(t + n) // 2)
        assert out.upper_steps["decoder"] == t // 2
    bench = GenerativeModel(GeneratorSpec("benchmark", (2, 2), 3, 3, t=4, n=4))
    out = bench(_obs(np.random.default_rng(2), 4, (1, 1, 3, 3)), n=4)
    assert out.upper_steps == {"encoder": 4, "decoder": 4, "predictor": 4}


def test_mrlstm_rejects_odd_lengths():
    with pytest.raises(ValueError):
        GeneratorSpec("mrlstm", (2, 2), 3, 3, t=3, n=4)
    model = GenerativeModel(GeneratorSpec("mrlstm", (2, 2), 3, 3, t=4, n=4))
    with pytest.raises(ValueError):
        model(_obs(np.random.default_rng(0), 4, (1, 1, 3, 3)), n=3)


def test_deterministic_init_and_forward():
    spec = GeneratorSpec("mrlayer", (3, 2), 4, 4, t=4, n=2)
    a, b = GenerativeModel(spec, 7), GenerativeModel(spec, 7)
    for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
        assert na == nb and pa.data.tobytes() == pb.data.tobytes()
    obs = _obs(np.random.default_rng(3), 4, (1, 1, 4, 4))
    assert a(obs, n=2).predictions[-1].data.tobytes() == b(obs, n=2).predictions[-1].data.tobytes()
    names = [n for n, _ in a.named_parameters()]
    assert len(names) == len(set(names))


def test_prediction_loss_reaches_encoder(f64):
    model = GenerativeModel(GeneratorSpec("benchmark", (2, 2), 4, 4, t=3, n=3), seed=2)
    out = model(_obs(np.random.default_rng(4), 3, (1, 1, 4, 4)), n=3)
    ad.tsum(ad.stack(out.predictions)).backward()
    grads = dict(model.named_parameters())
    assert np.any(grads["encoder.layer1.W_xi"].grad)
    assert np.any(grads["predictor.layer2.W_hc"].grad)


def test_conditioning_input_is_live(f64):
    model = GenerativeModel(GeneratorSpec("benchmark", (2, 2), 4, 4, t=3, n=2), seed=5)
    obs = _obs(np.random.default_rng(5), 3, (1, 1, 4, 4))
    base = model(obs, n=2).predictions[0].data
    changed = obs[:-1] + [Tensor(np.zeros((1, 1, 4, 4)))]
    assert not np.allclose(model(changed, n=2).predictions[0].data, base)


def test_true_coarse_future_substitution(f64):
    model = GenerativeModel(GeneratorSpec("mrlstm", (2, 2), 3, 3, t=4, n=4), seed=0)
    obs = _obs(np.random.default_rng(6), 4, (1, 1, 3, 3))
    forced = [Tensor(np.full((1, 1, 3, 3), 0.3)) for _ in range(2)]
    a = model(obs, n=4, coarse_future=forced).predictions
    b = model(obs, n=4).predictions
    assert len(a) == 4 and not np.allclose(a[-1].data, b[-1].data)
    with pytest.raises(ValueError):
        model(obs, n=4, coarse_future=forced[:1])

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from neurovid.data import (
    Scale,
    SequenceBatch,
    TensorFileError,
    WaveParams,
    denormalize,
    generate_waves,
    iter_batches,
    load_frames,
    normalize,
    read_tensor_file,
    sample_batch,
    split_frames,
    window,
    window_count,
    write_tensor_file,
)

from oracles import window_enumeration


def test_plane_wave_period():
    frames = generate_waves(WaveParams(speed=0.5, wavelength=8.0), 64)
    np.testing.assert_allclose(frames[0], frames[16], atol=1e-12)
    np.testing.assert_allclose(frames[5], frames[37], atol=1e-12)


def test_plane_wave_mean_over_period():
    frames = generate_waves(WaveParams(speed=0.5, wavelength=8.0), 48)
    # 16 frames is one full temporal period at every pixel
    assert abs(frames[:16].mean(axis=0)).max() < 1e-3


def test_zero_amplitude_and_bounds():
    assert not np.any(generate_waves(WaveParams(amplitude=0.0), 32))
    for kind in ("plane", "spiral", "pulse"):
        f = generate_waves(WaveParams(kind=kind, noise=0.5, seed=2), 40)
        assert f.shape == (40, 18, 20) and f.min() >= -1 and f.max() <= 1


def test_generation_is_deterministic():
    a = generate_waves(WaveParams(kind="spiral", noise=0.1, seed=9), 32)
    b = generate_waves(WaveParams(kind="spiral", noise=0.1, seed=9), 32)
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("bad", [dict(speed=0.0), dict(amplitude=1.5), dict(noise=-0.1), dict(kind="ring")])
def test_invalid_params(bad):
    with pytest.raises(ValueError):
        WaveParams(**bad)


def test_too_few_frames():
    with pytest.raises(ValueError):
        generate_waves(WaveParams(), 31)


def test_normalize_examples():
    data, scale = normalize(np.linspace(0, 10, 11))
    assert data.min() == -1 and data.max() == 1 and data[5] == 0
    sym, _ = normalize(np.array([-1.0, 0.25, 1.0]))
    np.testing.assert_allclose(sym, [-1.0, 0.25, 1.0], atol=1e-7)
    with pytest.raises(ValueError):
        normalize(np.ones(4))


@given(arrays(np.float64, 8, elements=st.floats(-1e3, 1e3)))
def test_normalize_round_trip(x):
    if x.max() - x.min() < 1e-3:
        return
    data, scale = normalize(x)
    assert data.min() >= -1 - 1e-12 and data.max() <= 1 + 1e-12
    np.testing.assert_allclose(denormalize(data, scale), x, atol=1e-6 * max(1.0, np.abs(x).max()))
    assert isinstance(scale, Scale)


def test_window_examples():
    frames = np.zeros((64, 2, 2))
    assert len(window(frames, stride=32)) == 2
    assert window(frames, stride=32).shape == (2, 1, 32, 2, 2)
    with pytest.raises(ValueError):
        window(np.zeros((31, 2, 2)))


@given(st.integers(0, 200), st.integers(1, 40))
def test_window_count_matches_enumeration(length, stride):
    assert window_count(length, stride) == len(window_enumeration(length, 32, stride))
    if length >= 32:
        assert len(window(np.zeros((length, 1, 1)), stride=stride)) == window_count(length, stride)


@given(st.integers(1, 16))
def test_window_coverage(stride):
    frames = np.arange(200.0)[:, None, None]
    w = window(frames, stride=stride)
    hits = np.bincount(w[:, 0, :, 0, 0].astype(int).ravel(), minlength=200)
    # any 32 consecutive start positions hold at least floor(32 / s) multiples of s
    interior = hits[40:150]
    assert interior.min() >= 32 // stride
    if 32 % stride == 0:
        assert np.all(interior == 32 // stride)


def test_split_keeps_windows_apart():
    frames = np.arange(1000.0)[:, None, None]
    train, test = split_frames(frames)
    assert len(train) == 880 and train[-1, 0, 0] + 1 == test[0, 0, 0]
    assert window(train).max() < 880 and window(test).min() >= 880


def test_sample_batch_is_keyed_on_iteration():
    w = np.arange(20.0).reshape(20, 1, 1, 1, 1) * np.ones((1, 1, 32, 1, 1))
    a = sample_batch(w, 4, seed=3, iteration=7)
    b = sample_batch(w, 4, seed=3, iteration=7)
    c = sample_batch(w, 4, seed=3, iteration=8)
    assert a.data.tobytes() == b.data.tobytes()
    assert a.data.tobytes() != c.data.tobytes()
    assert a.past.shape == (4, 1, 16, 1, 1) and a.n == 16
    assert len(set(a.data[:, 0, 0, 0, 0])) == 4


def test_batches_and_sequence_batch_checks():
    w = np.zeros((5, 1, 32, 2, 2))
    sizes = [len(b.data) for b in iter_batches(w, 2)]
    assert sizes == [2, 2, 1]
    with pytest.raises(ValueError):
        SequenceBatch(np.zeros((1, 1, 4, 2, 2)), t=4)


def test_tensor_file_round_trip_and_layout(tmp_path):
    x = np.random.default_rng(0).normal(size=(3, 18, 20)).astype(np.float32)
    path = tmp_path / "x.nvt"
    write_tensor_file(path, x)
    assert read_tensor_file(path).tobytes() == x.tobytes()
    write_tensor_file(path, np.zeros((32, 18, 20)))
    raw = path.read_bytes()
    # 20-byte header, then 4 bytes per element
    assert raw[:4] == b"NVT1" and len(raw) == 4 + 4 + 12 + 4 * 32 * 18 * 20
    assert raw[4:8] == (3).to_bytes(4, "little") and raw[8:12] == (32).to_bytes(4, "little")


@given(arrays(np.float32, st.tuples(st.integers(1, 4), st.integers(1, 4)),
              elements=st.floats(width=32, allow_nan=False, allow_infinity=False)))
def test_tensor_file_bit_exact(tmp_path_factory, x):
    path = tmp_path_factory.mktemp("t") / "a.nvt"
    write_tensor_file(path, x)
    assert read_tensor_file(path).tobytes() == x.tobytes()


def test_tensor_file_errors(tmp_path):
    good = tmp_path / "good.nvt"
    write_tensor_file(good, np.ones((2, 3, 3)))
    bad = tmp_path / "bad.nvt"
    bad.write_bytes(b"NVT2" + good.read_bytes()[4:])
    with pytest.raises(TensorFileError):
        read_tensor_file(bad)
    bad.write_bytes(good.read_bytes()[:-4])
    with pytest.raises(TensorFileError):
        read_tensor_file(bad)
    bad.write_bytes(b"NVT1" + (9).to_bytes(4, "little") + bytes(36))
    with pytest.raises(TensorFileError):
        read_tensor_file(bad)
    empty = tmp_path / "empty.nvt"
    empty.write_bytes(b"")
    with pytest.raises(TensorFileError):
        load_frames(empty)
    with pytest.raises(TensorFileError):
        load_frames(good, (4, 4))

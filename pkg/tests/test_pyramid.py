import numpy as np
import pytest
from hypothesis import given, strategies as st

from neurovid.pyramid import downsample, upsample


def test_downsample_formula():
    assert downsample([0.0, 2.0, 4.0, 6.0]) == [1.0, 5.0]


def test_upsample_midpoint_and_boundary():
    assert upsample([1.0, 5.0]) == [1.0, 1.0, 3.0, 5.0]
    assert upsample([1.0, 5.0], length=5) == [1.0, 1.0, 3.0, 5.0, 5.0]


def test_errors():
    with pytest.raises(ValueError):
        downsample([1.0])
    with pytest.raises(ValueError):
        upsample([])


@given(st.floats(-100, 100), st.integers(1, 20))
def test_constant_identity(value, half):
    seq = [value] * (2 * half)
    assert downsample(seq) == [value] * half
    assert upsample(downsample(seq)) == seq


@given(st.floats(-10, 10), st.floats(-10, 10), st.integers(2, 20))
def test_ramp_shift(a, b, half):
    ramp = [a + b * i for i in range(1, 2 * half + 1)]
    out = upsample(downsample(ramp))
    # interior samples are the ramp delayed by half a sample
    for i in range(2, 2 * half + 1):
        assert out[i - 1] == pytest.approx(ramp[i - 1] - b / 2, abs=1e-7)


def test_works_on_arrays():
    frames = [np.full((2, 2), float(i)) for i in range(1, 5)]
    coarse = downsample(frames)
    np.testing.assert_array_equal(coarse[0], 1.5)
    np.testing.assert_array_equal(upsample(coarse)[2], 2.5)

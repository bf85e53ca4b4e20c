import numpy as np
import pytest

from deint.frames import Field, Frame, Parity, ParityError, interlace, split_fields, weave
from deint.tensor import ContractViolation


def column(*values):
    return Frame(np.array(values, dtype=np.float32)[:, None])


def test_parity_offsets():
    assert Parity.ODD.offset == 0
    assert Parity.EVEN.offset == 1
    assert Parity.ODD.opposite is Parity.EVEN


def test_weave_example():
    frame = weave(Field(Parity.ODD, [[0.1], [0.3]]), Field(Parity.EVEN, [[0.2], [0.4]]))
    np.testing.assert_allclose(frame.data[:, 0], [0.1, 0.2, 0.3, 0.4], rtol=1e-6)


def test_weave_argument_order_does_not_matter():
    odd, even = Field(Parity.ODD, [[0.1], [0.3]]), Field(Parity.EVEN, [[0.2], [0.4]])
    np.testing.assert_array_equal(weave(odd, even).data, weave(even, odd).data)


def test_split_then_weave_is_identity(rng):
    frame = Frame(rng.random((6, 5, 3)))
    odd, even = split_fields(frame)
    assert odd.parity is Parity.ODD and even.parity is Parity.EVEN
    np.testing.assert_array_equal(weave(odd, even).data, frame.data)


def test_interlace_example():
    frame = interlace(column(0.1, 0.2, 0.3, 0.4), column(0.5, 0.6, 0.7, 0.8))
    np.testing.assert_allclose(frame.data[:, 0], [0.1, 0.6, 0.3, 0.8], rtol=1e-6)


def test_interlace_of_identical_frames_is_identity(rng):
    frame = Frame(rng.random((8, 4)))
    np.testing.assert_array_equal(interlace(frame, frame).data, frame.data)


def test_interlace_takes_each_field_from_its_frame(rng):
    frame_t, frame_t1 = Frame(rng.random((8, 6))), Frame(rng.random((8, 6)))
    odd, even = split_fields(interlace(frame_t, frame_t1))
    np.testing.assert_array_equal(odd.data, frame_t.rows(Parity.ODD))
    np.testing.assert_array_equal(even.data, frame_t1.rows(Parity.EVEN))


def test_same_parity_weave_rejected():
    field = Field(Parity.ODD, [[0.5]])
    with pytest.raises(ParityError):
        weave(field, field)


def test_weave_shape_mismatch_rejected():
    with pytest.raises(ContractViolation):
        weave(Field(Parity.ODD, [[0.5, 0.5]]), Field(Parity.EVEN, [[0.5]]))


def test_odd_height_rejected():
    frame = Frame(np.zeros((5, 4)))
    with pytest.raises(ParityError):
        split_fields(frame)
    with pytest.raises(ParityError):
        interlace(frame, frame)


def test_interlace_dimension_mismatch_rejected():
    with pytest.raises(ContractViolation):
        interlace(Frame(np.zeros((4, 4))), Frame(np.zeros((4, 6))))


def test_frame_channels():
    assert Frame(np.zeros((2, 2))).channels == 1
    assert Frame(np.zeros((2, 2, 1))).channels == 1
    assert Frame(np.zeros((2, 2, 3))).channels == 3
    with pytest.raises(ContractViolation):
        Frame(np.zeros((2, 2, 2)))


def test_parity_error_is_a_contract_violation():
    assert issubclass(ParityError, ContractViolation)


def test_split_weave_identity_on_many_frames(rng):
    for _ in range(1000):
        height, width = 2 * int(rng.integers(1, 6)), int(rng.integers(1, 6))
        frame = Frame(rng.random((height, width)))
        np.testing.assert_array_equal(weave(*split_fields(frame)).data, frame.data)

import numpy as np

from batchcf.streams import stream


def test_same_labels_same_sequence():
    a = stream(7, "engine").random(5)
    b = stream(7, "engine").random(5)
    assert np.array_equal(a, b)


def test_labels_separate_streams():
    assert not np.array_equal(stream(7, "engine").random(5),
                              stream(7, "model").random(5))
    assert not np.array_equal(stream(7, "resp", 0).random(5),
                              stream(7, "resp", 1).random(5))


def test_seed_changes_everything():
    assert not np.array_equal(stream(1, "engine").random(5),
                              stream(2, "engine").random(5))


def test_drawing_one_stream_never_perturbs_another():
    a = stream(7, "resp", 0)
    b = stream(7, "resp", 1)
    a.random(1000)
    assert np.array_equal(b.random(5), stream(7, "resp", 1).random(5))

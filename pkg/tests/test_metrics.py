import pytest
from hypothesis import given
from hypothesis import strategies as st

from argus_htr.metrics import edit_distance, error_counts, wer_cer


def test_edit_distance():
    assert edit_distance("kitten", "sitting") == 3
    assert edit_distance("", "abc") == 3
    assert edit_distance(["a", "b"], ["a", "b"]) == 0


@given(st.text(alphabet="abc", max_size=8), st.text(alphabet="abc", max_size=8), st.text(alphabet="abc", max_size=8))
def test_edit_distance_metric(a, b, c):
    assert edit_distance(a, b) == edit_distance(b, a)
    assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)
    assert abs(len(a) - len(b)) <= edit_distance(a, b) <= max(len(a), len(b))


def test_wer_examples():
    assert wer_cer(["a b c d"], ["a b c d"]) == (0.0, 0.0)
    assert wer_cer(["a b c d"], ["a x c d"])[0] == 25.0
    assert wer_cer(["one two six"], [""])[0] == 100.0
    assert wer_cer(["ab cd"], ["ab ce"])[1] == pytest.approx(20.0)


def test_corpus_level_pooling():
    assert error_counts(["a b", "c"], ["a", "d"]) == (2, 3, 3, 4)
    assert wer_cer(["a b", "c"], ["a", "d"])[0] == pytest.approx(200 / 3)


def test_single_spaces_split_words():
    assert wer_cer(["a  b"], ["a b"])[0] == 0.0


def test_empty_reference_set():
    with pytest.raises(ValueError):
        wer_cer([], [])
    with pytest.raises(ValueError):
        wer_cer(["a"], ["a", "b"])

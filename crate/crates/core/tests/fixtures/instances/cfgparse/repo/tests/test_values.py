import pytest

from cfgparse.values import parse_bool, parse_int


class TestParseBool:

    def test_true_words(self):
        assert parse_bool("true") is True
        assert parse_bool("on") is True

    def test_false_words(self):
        assert parse_bool("off") is False

    def test_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_bool("maybe")


def test_parse_int():
    assert parse_int(" 42 ") == 42

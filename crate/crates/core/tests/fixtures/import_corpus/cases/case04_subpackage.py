import pytest


def test_read_csv():
    assert read_csv("a,b") == [["a", "b"]]

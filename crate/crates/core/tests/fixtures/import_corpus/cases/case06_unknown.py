def test_unknown_helper():
    assert frobnicate(3) == 3

from seaborn_lite.utils import remove_na, to_float


def test_remove_na():
    assert remove_na([1, None, 2]) == [1, 2]


def test_to_float():
    assert to_float(["1", 2]) == [1.0, 2.0]

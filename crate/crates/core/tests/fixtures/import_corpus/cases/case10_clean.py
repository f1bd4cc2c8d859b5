from shapes.geometry import Circle, area


def test_clean():
    assert area(Circle(0)) == 0

from shapes.geometry import Circle, area


def test_area():
    assert area(Circle(1)) > 3

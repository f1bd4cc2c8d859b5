from shapes.geometry import Circle, area


def test_area_matches_pi():
    assert area(Circle(1)) == math.pi

from shapes.geometry import Circle


def test_module_access():
    assert geometry.area(Circle(0)) == 0

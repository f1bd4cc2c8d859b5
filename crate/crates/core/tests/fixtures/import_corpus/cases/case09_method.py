from shapes.geometry import Circle


class TestArea:

    def test_zero(self):
        assert area(Circle(0)) == 0

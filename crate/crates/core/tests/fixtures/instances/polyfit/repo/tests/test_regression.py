from seaborn_lite.regression import PolyFit


class TestPolyFit:

    def test_no_grouping(self):
        xx, yy = PolyFit(gridsize=3)([0, 1, 2], [0, 2, 4])
        assert xx == [0.0, 1.0, 2.0]
        assert yy == [0.0, 2.0, 4.0]

    def test_gridsize(self):
        xx, _ = PolyFit(gridsize=7)([0, 1, 2], [1, 1, 1])
        assert len(xx) == 7

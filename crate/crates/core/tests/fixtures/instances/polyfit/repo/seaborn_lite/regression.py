"""Small regression helpers."""


class PolyFit:
    """Fit a first-order polynomial and evaluate it on a grid."""

    def __init__(self, order=1, gridsize=5):
        self.order = order
        self.gridsize = gridsize

    def _fit_predict(self, x, y):
        n = len(x)
        mean_x = sum(x) / n
        mean_y = sum(y) / n
        sxx = sum((xi - mean_x) ** 2 for xi in x)
        sxy = sum((xi - mean_x) * (yi - mean_y) for xi, yi in zip(x, y))
        slope = sxy / sxx if sxx else 0.0
        intercept = mean_y - slope * mean_x
        lo, hi = min(x), max(x)
        step = (hi - lo) / (self.gridsize - 1) if self.gridsize > 1 else 0.0
        xx = [lo + i * step for i in range(self.gridsize)]
        yy = [intercept + slope * v for v in xx]
        return xx, yy

    def __call__(self, x, y):
        return self._fit_predict(x, y)

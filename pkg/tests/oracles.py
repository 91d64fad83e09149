"""Independent reference computations used by the verification suites."""

import numpy as np


def monte_carlo_enclosure(x, y, n=200_000, seed=1234):
    """Enclosure area of a closed polyline by crossing-number sampling over
    its bounding box. Independent of the shoelace path integral."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xs = np.append(x, x[0])
    ys = np.append(y, y[0])
    x0, x1 = x.min(), x.max()
    y0, y1 = y.min(), y.max()
    rng = np.random.default_rng(seed)
    px = rng.uniform(x0, x1, n)
    py = rng.uniform(y0, y1, n)
    inside = np.zeros(n, dtype=bool)
    for xa, ya, xb, yb in zip(xs[:-1], ys[:-1], xs[1:], ys[1:]):
        crosses = (ya > py) != (yb > py)
        if not crosses.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = xa + (py - ya) * (xb - xa) / (yb - ya)
        inside ^= crosses & (px < xint)
    return float(inside.mean() * (x1 - x0) * (y1 - y0))

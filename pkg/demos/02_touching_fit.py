"""Score stump pairs with the touching fit degree (TFD).

Builds pairs of vessel stumps from a shared smooth curve (good
continuation), from perpendicular curves (poor continuation), and from
head-on antiparallel curves (implausible), then prints the TFD for
each.  Pairs with TFD below sqrt(2) are considered connectable.
"""

import math

import numpy as np

from vesselmend.curves import tfd_with_reason
from vesselmend.skeleton import EndpointInfo


def stump(points, tree_id=0):
    points = np.asarray(points, dtype=float)
    return EndpointInfo(
        tree_id=tree_id, endpoint=tuple(np.round(points[0]).astype(int)),
        chain_mm=points, chain_voxels=[tuple(np.round(p).astype(int)) for p in points],
        radius_mm=1.0, degenerate=len(points) < 2)


def on_curve(ts):
    # gentle cubic arc, the "true" vessel course
    return np.stack([ts, 0.05 * ts ** 2, 0.01 * ts ** 3], axis=1)


def main():
    eps = math.sqrt(2.0)

    # two stumps of the same interrupted vessel, gap from t=0 to t=4
    p = stump(on_curve(np.linspace(0.0, -6.0, 7)))
    q = stump(on_curve(np.linspace(4.0, 10.0, 7)), tree_id=1)
    value, _ = tfd_with_reason(p, q)
    print(f"same-curve stumps:    TFD = {value:.3f}  "
          f"({'connect' if value < eps else 'reject'})")

    # a stump heading off perpendicular to the gap direction
    side = np.stack([np.full(7, 4.0), np.linspace(1.0, 7.0, 7), np.zeros(7)], axis=1)
    value, reason = tfd_with_reason(p, stump(side, tree_id=1))
    label = reason if reason else f"{value:.3f}"
    print(f"perpendicular stump:  TFD = {label}")

    # head-on antiparallel stumps: the connector would have to U-turn
    r = stump(on_curve(np.linspace(4.0, 10.0, 7))[::-1] * [1, -1, -1], tree_id=1)
    value, reason = tfd_with_reason(p, r)
    label = reason if reason else f"{value:.3f}"
    print(f"antiparallel stumps:  TFD = {label}")


if __name__ == "__main__":
    main()

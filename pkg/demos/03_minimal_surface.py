"""Relax a ruled patch between two connector curves to near-minimal area.

First a sanity check on the flat unit circle, where the minimal
spanning surface is the unit disk of area pi.  Then a bent loop (one
arc bowed out of plane), where relaxation visibly shrinks the initial
ruled patch.  The minimal-surface measure (reciprocal area) orders
candidate connections: tighter spanning surfaces connect first.
"""

import math

import numpy as np

from vesselmend.surface import ruled_mesh, min_surface_area, msmo


def semicircle_pair(n=64, tilt=0.0):
    th = np.linspace(0.0, math.pi, n)
    upper = np.column_stack([np.cos(th), np.sin(th), tilt * np.sin(th)])
    lower = np.column_stack([np.cos(th), -np.sin(th), np.zeros(n)])
    return upper, lower


def main():
    # flat circle: converged area should be pi
    upper, lower = semicircle_pair(n=64)
    area, mesh = min_surface_area(upper, lower, n=64)
    print(f"flat unit circle : area {area:.5f} vs pi {math.pi:.5f} "
          f"(err {abs(area - math.pi) / math.pi:.2%})")
    print(f"                   {len(mesh.vertices)} vertices, "
          f"{len(mesh.triangles)} triangles, Euler char {mesh.euler_characteristic()}")

    # bent loop: relaxation must strictly reduce the ruled-patch area
    upper, lower = semicircle_pair(n=64, tilt=0.6)
    init = ruled_mesh(upper, lower, n=64).area()
    history = []
    area, _ = min_surface_area(upper, lower, n=64, history=history)
    monotone = all(b <= a + 1e-12 for a, b in zip(history, history[1:]))
    print(f"bent loop        : ruled {init:.4f} -> relaxed {area:.4f} "
          f"in {len(history) - 1} sweeps (monotone: {monotone})")
    print(f"connection priority (1/area): flat {msmo(math.pi):.4f}, "
          f"bent {msmo(area):.4f} -- flatter gaps connect first")


if __name__ == "__main__":
    main()

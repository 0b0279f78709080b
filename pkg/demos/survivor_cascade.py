"""Exact escape bookkeeping for the doubling map with the left half-circle
removed after every step.

The hole [0, 1/2) is a union of level-1 dyadic arcs, so on a dyadic grid the
Ulam picture loses nothing: the survivor measure halves every step and the
per-step escaped mass walks down the geometric ladder 2^-k exactly.
"""
import numpy as np

from opendyn import (GridDensity, HoleSequence, MapSequence, doubling_map,
                     escape_mass, evolve, interval_hole, survivor_measure)
from opendyn.phase import Grid

M = 10
g = Grid(1, 4096)
seq = MapSequence.constant(doubling_map(), M)
holes = HoleSequence.static(interval_hole(0.0, 0.5), M)

print("doubling map, hole [0, 1/2) applied to the image, n = %d" % g.n)
print("%3s  %22s  %22s  %10s" % ("m", "survivor measure", "2^-m", "abs err"))
for m in range(1, M + 1):
    s = survivor_measure(seq, holes, m, g)
    print("%3d  %22.16f  %22.16f  %10.2e" % (m, s, 2.0 ** -m, abs(s - 2.0 ** -m)))

phi0 = GridDensity.uniform(g)
traj = [phi0] + evolve(seq, holes, phi0, M)
esc = escape_mass(traj)
print("\nper-step escaped mass (uniform start):")
worst = 0.0
for k, e in enumerate(esc, start=1):
    worst = max(worst, abs(e - 2.0 ** -k))
    print("  step %2d: escaped %.16f   target 2^-%d" % (k, e, k))
print("worst deviation from the exact ladder: %.3e" % worst)

"""Where the two-sided mixing window opens, partition by partition.

For the doubling map and dyadic arc partitions the conditional image ratios
hit 1 exactly as soon as the iterate resolves the partition level, so the
certified window start E equals the level.  A deliberately tight ratio band
shows what failure looks like, and a coarse uneven partition shows E moving
above the trivial value.
"""
import numpy as np

from opendyn import (CertificateError, certify_mixing, doubling_map,
                     dyadic_partition, find_mixing_time, mixing_ratios,
                     partition_from_labels, tripling_map)
from opendyn.phase import Grid

g = Grid(1, 4096)
doub = doubling_map()

print("doubling map, dyadic partitions:")
print("%6s %4s   ratio range at i = level .. level+3" % ("arcs", "E"))
for level in (1, 2, 3, 4):
    Q = dyadic_partition(g, level)
    E = find_mixing_time(doub, Q, 0.9, 1.1, 12)
    spans = ["[%.3f, %.3f]" % mixing_ratios(doub, Q, i)
             for i in range(level, level + 4)]
    print("%6d %4d   %s" % (2 ** level, E, "  ".join(spans)))

print("\nratios below the window start are honest about the defect:")
Q3 = dyadic_partition(g, 3)
for i in (1, 2, 3):
    print("  i = %d: ratios %s" % (i, "[%.3f, %.3f]" % mixing_ratios(doub, Q3, i)))

print("\ntripling map on 3 equal arcs:")
labels = np.minimum((np.arange(g.n) * 3) // g.n, 2)
Q_three = partition_from_labels(g, labels)
E3 = find_mixing_time(tripling_map(), Q_three, 0.9, 1.1, 10)
print("  E = %d (one application already distributes every arc evenly)" % E3)

print("\na band too tight to certify raises instead of guessing:")
try:
    certify_mixing(doub, dyadic_partition(g, 2), 0.999, 1.001, i_max=1)
except CertificateError as exc:
    print("  CertificateError:", exc)

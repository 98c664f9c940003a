"""
Auditing positivity on random families
======================================

Gram matrices of a Green functional on a finite family of arguments must be
positive semidefinite, and so must the reflected ones when the time profiles
live on the positive half circle.  The audit diagonalizes each matrix; a
kernel with flipped off-diagonal signs shows what a violation looks like.
"""
import numpy as np

import kmsgreen as kg
from kmsgreen.verify import CorruptedKernel, kernel_positivity, reflection_positivity, s_positivity

rng = np.random.default_rng(3)
beta = 2.0
circle = kg.ThermalCircle(beta)
grid = kg.gaussian_packet(1, 0.0, 1.0, n_nodes=33, cutoff=6.0)


def family(size, half):
    lo, hi = (0.0, beta / 2) if half else (-beta / 2, beta / 2 - 1e-9)
    out = []
    for _ in range(size):
        f = grid.with_values(grid.v * complex(*rng.normal(size=2)) * np.exp(1j * rng.normal() * grid.k[:, 0]))
        out.append(kg.Argument.of(kg.DeltaComb(rng.uniform(lo, hi, 2), rng.normal(size=2)), f))
    return out


measure = kg.SpectralMeasure.two_atom(1.0, 2.0)
models = {
    "free": kg.QuasiFreeSpec.free(kg.Dispersion("relativistic", 1.0), circle),
    "generalized free": kg.generalized_free(measure, "relativistic", circle),
    "mixture": kg.Mixture(measure, "relativistic", circle),
}
fam, half = family(8, False), family(8, True)
for name, g in models.items():
    s = s_positivity(g, fam)
    r = reflection_positivity(g, half, circle)
    print(f"{name:17s} S: {s.verdict:10s} lambda_min {s.min_eigenvalue: .2e}   "
          f"RP: {r.verdict:10s} lambda_min {r.min_eigenvalue: .2e}")

###############################################################################
# Negative control.
kernel = kg.FreeKernel(kg.Dispersion("nonrelativistic", 1.0), circle)
node = kg.single_node()
sharp = [kg.Argument.of(kg.DeltaComb.single(t), node) for t in (0.0, 0.3, 0.6)]
print("free kernel      :", kernel_positivity(kernel, sharp).verdict)
print("corrupted kernel :", kernel_positivity(CorruptedKernel(kernel), sharp).verdict)

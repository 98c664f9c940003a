"""
A mixture of free states is not quasi-free
==========================================

Averaging free thermal functionals over two chemical potentials keeps every
positivity property, but the result is no longer Gaussian: its connected
four-point function is nonzero.  At equal arguments with variances a and b
it equals (3/4)(a - b)^2.
"""
import numpy as np

import kmsgreen as kg

circle = kg.ThermalCircle(2.0)
node = kg.single_node()
points = [(0.0, node)] * 4

a, b = 1 / np.tanh(1.0), 1 / np.tanh(2.0)
closed = 0.75 * (a - b) ** 2

mixture = kg.SpectralMeasure.two_atom(1.0, 2.0)
kappa = kg.mixture_cumulant(mixture, "nonrelativistic", circle, points)
print(f"partition sum : {kappa.real:.15f}")
print(f"closed form   : {closed:.15f}")

###############################################################################
# The single-atom and the generalized free state (Gaussian with the averaged
# kernel) both have vanishing higher cumulants.
dirac = kg.mixture_cumulant(kg.SpectralMeasure.dirac(1.0), "nonrelativistic", circle, points)
gen = kg.cumulant(kg.generalized_free(mixture, "nonrelativistic", circle), points)
print(f"Dirac measure : {abs(dirac):.1e}")
print(f"generalized   : {abs(gen):.1e}")

###############################################################################
# The same numbers, built by hand from the moment family.
model = kg.Mixture(mixture, "nonrelativistic", circle)
m2 = kg.schwinger_moment(model, points[:2]).real
m4 = kg.schwinger_moment(model, points).real
print(f"m4 - 3 m2^2   : {m4 - 3 * m2**2:.15f}")

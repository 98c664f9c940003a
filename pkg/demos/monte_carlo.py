"""
Sampling the mixture process
============================

Draw an atom, then a Gaussian vector with that atom's covariance.  The
empirical characteristic function and the k-statistic of order four should
agree with the analytic values within a few standard errors.
"""
import numpy as np

import kmsgreen as kg
from kmsgreen.sampler import empirical_green, empirical_moment, k_statistic, sample_mixture

circle = kg.ThermalCircle(2.0)
node = kg.single_node()
points = [(0.0, node), (0.5, node)]
measure = kg.SpectralMeasure.two_atom(1.0, 2.0)

batch = sample_mixture(measure, "nonrelativistic", circle, points, N=1_000_000, seed=2026)
print("atom-1 frequency:", np.mean(batch.atoms == 0))

model = kg.Mixture(measure, "nonrelativistic", circle)
for c in ([1.0, 0.0], [1.0, -1.0]):
    est = empirical_green(batch, c)
    exact = model.multitime([(t, ci * f) for (t, f), ci in zip(points, c)])
    print(f"G at c={c}: {est.value.real:.5f} +- {est.stderr:.5f}  (exact {exact.real:.5f})")

est = empirical_moment(batch, (0, 0, 1, 1))
print(f"E[X0^2 X1^2]: {est.value:.4f} +- {est.stderr:.4f}  "
      f"(exact {kg.schwinger_moment(model, [points[0]] * 2 + [points[1]] * 2).real:.4f})")

a, b = 1 / np.tanh(1.0), 1 / np.tanh(2.0)
k4 = k_statistic(batch, column=0, order=4)
print(f"k4: {k4.value:.5f} +- {k4.stderr:.5f}  (exact {0.75 * (a - b) ** 2:.5f})")

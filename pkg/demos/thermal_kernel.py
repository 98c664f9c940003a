"""
The thermal covariance on the circle
====================================

The free Bose covariance at spectral value h is periodic in imaginary time
with period beta.  Here we evaluate it in closed form, compare with its
Matsubara frequency sum, and watch it approach exp(-h|t|) at low temperature.
"""
import numpy as np

import kmsgreen as kg

beta = 2.0
circle = kg.ThermalCircle(beta)

# closed form on a few times; symmetric around beta/2
t = np.linspace(0.0, beta, 9)
print("t        K_1(t)")
for ti, ki in zip(t, kg.covariance_scalar(1.0, t, circle)):
    print(f"{ti:5.2f}  {ki:.12f}")

###############################################################################
# The Matsubara sum converges slowly (terms fall like 1/n^2).  At t = 0 the
# plain truncated sum is only good to about h*beta/(pi^2 N); away from t = 0
# the tail oscillates and partly cancels.  Subtracting the 1/n^2 tail
# analytically buys several digits at no cost.
h, t0 = 2.0, 0.7
closed = kg.covariance_scalar(h, t0, circle)
for order in (0, 1):
    series = kg.matsubara_covariance(h, t0, beta, n_modes=100_000, resum_order=order)
    print(f"resum order {order}: |closed - series| = {abs(closed - series):.2e}")

# deep in the tail only extended precision resolves the value
deep = kg.matsubara_covariance(20.0, 4.0, 8.0, resum_order=24, dps=150)
print(f"K_20(4) at beta=8: closed {kg.covariance_scalar(20.0, 4.0, kg.ThermalCircle(8.0)):.15e}"
      f"  series {deep:.15e}")

###############################################################################
# Low temperature: the second image term dies off.
cold = kg.ThermalCircle(50.0)
tt = np.linspace(0, 2, 5)
print("max |K - exp(-h t)| at beta=50:", np.max(np.abs(kg.covariance_scalar(1.0, tt, cold) - np.exp(-tt))))

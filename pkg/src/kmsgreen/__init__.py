"""Thermal Green functionals of free Bose fields on the imaginary-time circle, and their mixtures."""

__version__ = "0.1.0"

from .spectral import Dispersion, TestFunction, gaussian_packet, single_node, spectral_pairing
from .kernel import (
    Argument,
    DeltaComb,
    FreeKernel,
    MatsubaraSeries,
    MixedKernel,
    SpectralMeasure,
    ThermalCircle,
    covariance_scalar,
    kernel_mixed,
    kernel_sharp,
    kernel_smeared,
    matsubara_covariance,
)
from .greens import (
    Mixture,
    QuasiFreeSpec,
    generalized_free,
    mixture_green,
    mixture_multitime,
    multitime_green,
    quasifree_green,
    schwinger_moment,
)
from .cumulants import cumulant, enumerate_partitions, mixture_cumulant, truncate, untruncate

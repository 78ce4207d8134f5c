"""Time encoding of sparse signals and their exact recovery from spike times.

Modules
-------
kernels
    B-splines, E-splines and their derivative, box- and pulse-convolved
    forms, as exact piecewise functions.
signal_models
    Dirac streams, bursts, pulse streams, piecewise-constant signals,
    filtering and noise.
tem
    Crossing and integrate-and-fire encoders.
reproduction
    Coefficients reproducing exponentials from non-uniform kernel shifts.
spectral
    Prony's method, Cadzow denoising and the rank probe.
reconstruct
    Decoders and trigger-mark conditions.
cli
    Experiment runner.
"""

from .kernels import (SplineKernel, cos2_pulse, convolve_box, convolve_pulse, derivative_kernel,
                      make_bspline, make_espline, parse_kernel)
from .reconstruct import ChannelBank, DecodeError, Estimate
from .signal_models import (BurstSequence, DiracStream, FilteredInput, NoiseSpec,
                            PiecewiseConstant, PulseStream)
from .spectral import cadzow, prony
from .tem import CrossingConfig, IntegrateFireConfig, SpikeTrain, encode_crossing, encode_if

__version__ = "0.1.0"

"""Spectrally-precoded OFDM/SC-FDMA waveform shaping and link simulation."""

from .numerology import (
    Numerology,
    SubcarrierAllocation,
    build_profile,
    profile_ids,
    subcarrier_frequencies,
)
from .precoding import (
    ConstraintMatrix,
    DistortionReport,
    OpCounter,
    Projector,
    build_projector,
    continuity_constraints,
    distortion,
    notch_constraints,
    precode,
    rate_loss,
    stack,
    subcarrier_kernel,
)
from .waveform import (
    TimeSignal,
    dft_despread,
    dft_spread,
    ofdm_demodulate,
    ofdm_modulate,
)

__version__ = "0.1.0"

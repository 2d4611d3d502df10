"""Time-frequency numerology and subcarrier allocations.

Conventions:
- Subcarrier indices are centered around DC (index 0); DC is excluded by
  default (dc_null), following the LTE downlink convention.
- The FFT size L fixes the modulation sample rate fs = L * subcarrier_spacing.
- The cyclic prefix is uniform across symbols and must be an integer number
  of samples at fs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Numerology",
    "SubcarrierAllocation",
    "build_profile",
    "profile_ids",
    "subcarrier_frequencies",
]


@dataclass(frozen=True)
class Numerology:
    """Sampled OFDM grid: K active subcarriers on an L-point FFT.

    Attributes:
        subcarrier_count: number of active (modulated) subcarriers K.
        subcarrier_spacing: spacing between subcarriers in Hz.
        fft_size: modulation FFT length L (samples per useful period).
        cp_samples: cyclic prefix length in samples at fs = L * spacing.
    """

    subcarrier_count: int
    subcarrier_spacing: float
    fft_size: int
    cp_samples: int

    def __post_init__(self) -> None:
        if self.subcarrier_count <= 0:
            raise ValueError("subcarrier_count must be positive")
        if self.subcarrier_spacing <= 0:
            raise ValueError("subcarrier_spacing must be positive")
        if self.fft_size % 2 != 0:
            raise ValueError("fft_size must be even")
        if self.subcarrier_count >= self.fft_size:
            raise ValueError("need subcarrier_count < fft_size")
        if self.cp_samples < 0:
            raise ValueError("cp_samples must be nonnegative")

    @classmethod
    def from_cp_duration(
        cls,
        subcarrier_count: int,
        subcarrier_spacing: float,
        fft_size: int,
        cp_duration: float,
    ) -> "Numerology":
        """Build from a CP duration in seconds; must land on the sample grid."""
        fs = fft_size * subcarrier_spacing
        cp_exact = cp_duration * fs
        cp_samples = int(round(cp_exact))
        if cp_exact > 0 and abs(cp_exact - cp_samples) > 1e-9 * cp_exact:
            raise ValueError(
                f"cp_duration {cp_duration} s is not an integer number of "
                f"samples at fs={fs} Hz ({cp_exact} samples)"
            )
        return cls(subcarrier_count, subcarrier_spacing, fft_size, cp_samples)

    @property
    def useful_duration(self) -> float:
        """Useful (FFT) period T = 1/spacing in seconds."""
        return 1.0 / self.subcarrier_spacing

    @property
    def sample_rate(self) -> float:
        return self.fft_size * self.subcarrier_spacing

    @property
    def cp_duration(self) -> float:
        return self.cp_samples / self.sample_rate

    @property
    def symbol_duration(self) -> float:
        """Total symbol duration T_o = T + T_cp."""
        return self.useful_duration + self.cp_duration

    @property
    def samples_per_symbol(self) -> int:
        return self.fft_size + self.cp_samples


@dataclass(frozen=True)
class SubcarrierAllocation:
    """Set of active subcarriers as sorted, distinct centered indices."""

    indices: tuple[int, ...]
    dc_null: bool = True

    def __post_init__(self) -> None:
        idx = self.indices
        if len(idx) == 0:
            raise ValueError("allocation must contain at least one subcarrier")
        if any(idx[i] >= idx[i + 1] for i in range(len(idx) - 1)):
            raise ValueError("indices must be strictly increasing")
        if self.dc_null and 0 in idx:
            raise ValueError("DC subcarrier present but dc_null is set")

    def __len__(self) -> int:
        return len(self.indices)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=int)

    def validate_for(self, num: Numerology) -> None:
        """Check the allocation fits the numerology's FFT grid."""
        half = num.fft_size // 2
        if self.indices[0] <= -half or self.indices[-1] >= half:
            raise ValueError(
                f"subcarrier indices must lie in [{-half + 1}, {half - 1}]"
            )
        if len(self.indices) != num.subcarrier_count:
            raise ValueError(
                f"allocation has {len(self.indices)} subcarriers, "
                f"numerology expects {num.subcarrier_count}"
            )


def _centered_block(count: int, dc_null: bool = True) -> tuple[int, ...]:
    """Centered contiguous allocation of `count` subcarriers around DC."""
    half = count // 2
    if dc_null:
        if count % 2 != 0:
            raise ValueError("dc_null allocation needs an even subcarrier count")
        return tuple(range(-half, 0)) + tuple(range(1, half + 1))
    return tuple(range(-half, count - half))


# LTE 10 MHz grid: 15 kHz spacing, 1024-point FFT, fs = 15.36 MHz.
_LTE10_SPACING = 15e3
_LTE10_FFT = 1024
# Uniform normal CP, 4.6875 us = 72 samples at 15.36 MHz.
_LTE10_CP_SAMPLES = 72
# Reduced CP sized to just cover the EVA maximum excess delay of 2.51 us:
# ceil(2.51e-6 * 15.36e6) = 39 samples (~2.54 us, ~54% of the normal CP).
_LTE10_SHORT_CP_SAMPLES = 39

# Scaled-down prototype grid: 5 kHz spacing, 512-point FFT, fs = 2.56 MHz,
# CP scaled accordingly (3 x 4.6875 us = 36 samples).
_PROTO_SPACING = 5e3
_PROTO_FFT = 512
_PROTO_CP_SAMPLES = 36


def _lte10(cp_samples: int) -> tuple[Numerology, SubcarrierAllocation]:
    num = Numerology(600, _LTE10_SPACING, _LTE10_FFT, cp_samples)
    alloc = SubcarrierAllocation(_centered_block(600))
    return num, alloc


def _fragmented450() -> tuple[Numerology, SubcarrierAllocation]:
    # Two groups of 300 and 150 subcarriers on the lte10 grid with a
    # 150-subcarrier hole between them (hole covers DC and +1..+150).
    idx = tuple(range(-300, 0)) + tuple(range(151, 301))
    num = Numerology(450, _LTE10_SPACING, _LTE10_FFT, _LTE10_CP_SAMPLES)
    return num, SubcarrierAllocation(idx)


def _proto300() -> tuple[Numerology, SubcarrierAllocation]:
    # 300 active subcarriers at 5 kHz with a central 75-subcarrier hole
    # (indices -37..+37 unmodulated, DC included in the hole).
    idx = tuple(range(-187, -37)) + tuple(range(38, 188))
    num = Numerology(300, _PROTO_SPACING, _PROTO_FFT, _PROTO_CP_SAMPLES)
    return num, SubcarrierAllocation(idx)


_BUILDERS = {
    "lte10": lambda: _lte10(_LTE10_CP_SAMPLES),
    "lte10-shortcp": lambda: _lte10(_LTE10_SHORT_CP_SAMPLES),
    "fragmented450": _fragmented450,
    "proto300": _proto300,
}

_SCFDMA_SUFFIX = "-scfdma"


def profile_ids() -> list[str]:
    """All selectable profile ids, including SC-FDMA variants."""
    base = sorted(_BUILDERS)
    return base + [name + _SCFDMA_SUFFIX for name in base]


def is_scfdma_profile(name: str) -> bool:
    return name.endswith(_SCFDMA_SUFFIX)


def build_profile(name: str) -> tuple[Numerology, SubcarrierAllocation]:
    """Return (numerology, allocation) for a named profile.

    SC-FDMA variants (`<id>-scfdma`) share the grid of their base profile;
    the suffix selects DFT spreading in the transmit chain.
    """
    base = name[: -len(_SCFDMA_SUFFIX)] if is_scfdma_profile(name) else name
    try:
        builder = _BUILDERS[base]
    except KeyError:
        known = ", ".join(profile_ids())
        raise ValueError(f"unknown profile {name!r}; known profiles: {known}")
    num, alloc = builder()
    alloc.validate_for(num)
    return num, alloc


def subcarrier_frequencies(
    num: Numerology, alloc: SubcarrierAllocation
) -> np.ndarray:
    """Center frequency in Hz of each active subcarrier, in index order."""
    alloc.validate_for(num)
    return alloc.as_array() * num.subcarrier_spacing

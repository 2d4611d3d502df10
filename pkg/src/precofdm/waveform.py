"""OFDM / SC-FDMA modulation between resource grids and sampled baseband.

A resource grid is a plain complex array of shape (S, K): S symbols by K
active subcarriers ordered like the allocation. All transforms are unitary
so power bookkeeping is independent of the FFT size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerology import Numerology, SubcarrierAllocation

__all__ = [
    "TimeSignal",
    "ofdm_modulate",
    "ofdm_demodulate",
    "dft_spread",
    "dft_despread",
]


@dataclass(frozen=True)
class TimeSignal:
    """Sampled complex baseband with symbol boundary metadata.

    `symbol_starts` index the first CP sample of each OFDM symbol;
    `fft_size` is the useful-part length in samples (None when the signal
    has no OFDM framing, e.g. after arbitrary processing).
    """

    samples: np.ndarray
    sample_rate: float
    symbol_starts: np.ndarray = field(default_factory=lambda: np.empty(0, int))
    fft_size: int | None = None

    def __post_init__(self) -> None:
        starts = np.asarray(self.symbol_starts, dtype=int)
        if starts.size > 1 and np.any(np.diff(starts) <= 0):
            raise ValueError("symbol_starts must be strictly increasing")
        object.__setattr__(self, "symbol_starts", starts)

    def __len__(self) -> int:
        return len(self.samples)

    def with_samples(self, samples: np.ndarray) -> "TimeSignal":
        return TimeSignal(samples, self.sample_rate, self.symbol_starts, self.fft_size)


def _grid_to_bins(grid: np.ndarray, alloc: SubcarrierAllocation, fft_size: int) -> np.ndarray:
    s = grid.shape[0]
    full = np.zeros((s, fft_size), dtype=complex)
    bins = np.mod(alloc.as_array(), fft_size)
    full[:, bins] = grid
    return full


def ofdm_modulate(
    num: Numerology, alloc: SubcarrierAllocation, grid: np.ndarray
) -> TimeSignal:
    """Modulate an (S, K) grid to sampled baseband with cyclic prefixes.

    Unitary IFFT scaling (1/sqrt(L)); the CP is the last cp_samples of each
    useful part, prepended.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=complex))
    alloc.validate_for(num)
    if grid.shape[1] != len(alloc):
        raise ValueError(
            f"grid has {grid.shape[1]} subcarriers, allocation {len(alloc)}"
        )
    l_fft = num.fft_size
    cp = num.cp_samples
    useful = np.fft.ifft(_grid_to_bins(grid, alloc, l_fft), axis=1) * np.sqrt(l_fft)
    blocks = np.concatenate([useful[:, l_fft - cp :], useful], axis=1)
    starts = np.arange(grid.shape[0]) * (l_fft + cp)
    return TimeSignal(blocks.ravel(), num.sample_rate, starts, l_fft)


def ofdm_demodulate(
    num: Numerology, alloc: SubcarrierAllocation, sig: TimeSignal
) -> np.ndarray:
    """Demodulate back to an (S, K) grid: drop CP, unitary FFT, pick bins.

    The signal must cover every symbol advertised by its boundary metadata.
    """
    alloc.validate_for(num)
    l_fft = num.fft_size
    cp = num.cp_samples
    block = l_fft + cp
    starts = sig.symbol_starts
    if starts.size == 0:
        n_sym = len(sig.samples) // block
        if n_sym * block != len(sig.samples):
            raise ValueError("signal length is not a whole number of symbols")
        starts = np.arange(n_sym) * block
    if starts[-1] + block > len(sig.samples):
        raise ValueError("signal truncated before the last symbol end")
    idx = starts[:, None] + cp + np.arange(l_fft)
    useful = sig.samples[idx]
    spectrum = np.fft.fft(useful, axis=1) / np.sqrt(l_fft)
    bins = np.mod(alloc.as_array(), l_fft)
    return spectrum[:, bins]


def dft_spread(block: np.ndarray, guard_pulses: int = 0) -> np.ndarray:
    """DFT-spread a pulse block onto subcarrier amplitudes.

    The first and last `guard_pulses` time-domain pulse positions are
    zeroed (guards smoothing the transition between symbols), then a
    unitary forward DFT spreads the block over the subcarriers.
    """
    block = np.asarray(block, dtype=complex)
    q = block.shape[-1]
    if guard_pulses < 0 or 2 * guard_pulses >= q:
        raise ValueError(f"need 0 <= 2*guard_pulses < block length {q}")
    if guard_pulses:
        block = block.copy()
        block[..., :guard_pulses] = 0
        block[..., q - guard_pulses :] = 0
    return np.fft.fft(block, axis=-1) / np.sqrt(q)


def dft_despread(spread: np.ndarray, guard_pulses: int = 0) -> np.ndarray:
    """Invert `dft_spread`; guard positions come back (approximately) zero."""
    spread = np.asarray(spread, dtype=complex)
    q = spread.shape[-1]
    if guard_pulses < 0 or 2 * guard_pulses >= q:
        raise ValueError(f"need 0 <= 2*guard_pulses < block length {q}")
    return np.fft.ifft(spread, axis=-1) * np.sqrt(q)

"""AWGN and tapped-delay-line Rayleigh fading channels.

Fading is quasi-static block fading: one realization per codeword, drawn
from a TDL power profile with independent complex-Gaussian taps placed at
the nearest sample instant. All randomness flows through explicit
numpy Generators so trials reproduce exactly from a seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .waveform import TimeSignal

__all__ = [
    "TdlProfile",
    "ChannelRealization",
    "eva_profile",
    "realize",
    "apply_channel",
    "add_awgn",
    "freq_response",
    "miso_channel",
]


@dataclass(frozen=True)
class TdlProfile:
    """Tapped-delay-line profile; linear tap powers normalized to sum 1."""

    tap_delays: np.ndarray
    tap_powers_db: np.ndarray

    def __post_init__(self) -> None:
        delays = np.asarray(self.tap_delays, dtype=float)
        powers = np.asarray(self.tap_powers_db, dtype=float)
        if delays.shape != powers.shape:
            raise ValueError("delays and powers must have the same length")
        if delays[0] < 0 or np.any(np.diff(delays) <= 0):
            raise ValueError("delays must be nonnegative and strictly increasing")
        object.__setattr__(self, "tap_delays", delays)
        object.__setattr__(self, "tap_powers_db", powers)

    @property
    def linear_powers(self) -> np.ndarray:
        p = 10 ** (self.tap_powers_db / 10)
        return p / p.sum()

    @property
    def max_excess_delay(self) -> float:
        return float(self.tap_delays[-1])


def eva_profile() -> TdlProfile:
    """LTE Extended Vehicular A profile (9 taps, 2510 ns excess delay)."""
    delays_ns = [0, 30, 150, 310, 370, 710, 1090, 1730, 2510]
    powers_db = [0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9]
    return TdlProfile(np.asarray(delays_ns) * 1e-9, np.asarray(powers_db))


@dataclass(frozen=True)
class ChannelRealization:
    """One quasi-static discrete impulse response at sample rate fs."""

    cir: np.ndarray
    sample_rate: float

    @property
    def max_delay_samples(self) -> int:
        return len(self.cir) - 1


def realize(
    profile: TdlProfile, fs: float, rng: np.random.Generator
) -> ChannelRealization:
    """Draw one realization: CN(0, p_i) per tap at the nearest sample."""
    if fs <= 0:
        raise ValueError("fs must be positive")
    powers = profile.linear_powers
    pos = np.round(profile.tap_delays * fs).astype(int)
    cir = np.zeros(pos[-1] + 1, dtype=complex)
    gains = (
        rng.standard_normal(len(powers)) + 1j * rng.standard_normal(len(powers))
    ) * np.sqrt(powers / 2)
    np.add.at(cir, pos, gains)  # colliding taps sum
    return ChannelRealization(cir, fs)


def apply_channel(
    cir: ChannelRealization | np.ndarray, sig: TimeSignal
) -> TimeSignal:
    """Linear convolution with the impulse response (full length)."""
    h = cir.cir if isinstance(cir, ChannelRealization) else np.asarray(cir)
    out = np.convolve(sig.samples, h)
    return TimeSignal(out, sig.sample_rate, sig.symbol_starts, sig.fft_size)


def add_awgn(
    sig: TimeSignal,
    snr_db: float | None,
    ref_power: float,
    rng: np.random.Generator,
) -> TimeSignal:
    """Add circular complex Gaussian noise.

    Per-sample noise variance is ref_power / 10^(snr/10); `ref_power` is the
    mean useful-part transmit power measured before the channel. snr_db of
    None or +inf leaves the signal untouched.
    """
    if snr_db is None or np.isinf(snr_db):
        return sig
    var = ref_power / 10 ** (snr_db / 10)
    n = len(sig.samples)
    noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(var / 2)
    return sig.with_samples(sig.samples + noise)


def freq_response(
    cir: np.ndarray, indices: np.ndarray, fft_size: int, shift: int = 0
) -> np.ndarray:
    """Channel frequency response at centered subcarrier bins.

    `shift` re-references the response to a symbol window advanced by that
    many samples (used when transmit filtering advances the alignment).
    """
    cir = np.asarray(cir, dtype=complex)
    n = np.arange(len(cir)) - shift
    k = np.asarray(indices)[:, None]
    return np.sum(cir[None, :] * np.exp(-2j * np.pi * k * n / fft_size), axis=1)


def miso_channel(
    profile: TdlProfile,
    n_tx: int,
    fs: float,
    indices: np.ndarray,
    fft_size: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, list[ChannelRealization]]:
    """Independent per-antenna realizations and their per-subcarrier rows.

    Returns (h, cirs) where h has shape (K, n_tx): h[k, i] is antenna i's
    frequency response at active bin k.
    """
    if n_tx < 1:
        raise ValueError("n_tx must be >= 1")
    cirs = [realize(profile, fs, rng) for _ in range(n_tx)]
    h = np.stack(
        [freq_response(c.cir, indices, fft_size) for c in cirs], axis=1
    )
    return h, cirs

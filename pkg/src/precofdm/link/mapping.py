"""Gray-mapped QAM constellations, bit mapping and max-log LLR demapping.

All constellations are square and separable (independent Gray-coded PAM per
I/Q axis) with unit mean symbol energy. Within each symbol the first half of
the bits select the I level and the second half the Q level.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "Constellation",
    "Mcs",
    "get_constellation",
    "qam_map",
    "llr_demap",
    "hard_decision",
    "soft_symbols",
]

# Gray-coded PAM: level i carries bit pattern _GRAY[m][i] (m bits per axis).
_GRAY = {
    1: [(0,), (1,)],
    2: [(0, 0), (0, 1), (1, 1), (1, 0)],
    3: [
        (0, 0, 0),
        (0, 0, 1),
        (0, 1, 1),
        (0, 1, 0),
        (1, 1, 0),
        (1, 1, 1),
        (1, 0, 1),
        (1, 0, 0),
    ],
}


@dataclass(frozen=True)
class Constellation:
    """Separable Gray-mapped square QAM constellation."""

    name: str
    levels: np.ndarray  # PAM levels per axis, unit mean symbol energy overall
    bit_table: np.ndarray  # (n_levels, bits_per_axis)

    @property
    def bits_per_axis(self) -> int:
        return self.bit_table.shape[1]

    @property
    def bits_per_symbol(self) -> int:
        return 2 * self.bits_per_axis

    @property
    def points(self) -> np.ndarray:
        """Full 2-D constellation (n_levels^2 points)."""
        return (self.levels[:, None] + 1j * self.levels[None, :]).ravel()

    @property
    def mean_energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))


def _make(name: str, m: int, raw_levels: list[int]) -> Constellation:
    levels = np.asarray(raw_levels, dtype=float)
    levels = levels / np.sqrt(2 * np.mean(levels**2))
    table = np.asarray(_GRAY[m], dtype=np.uint8)
    return Constellation(name, levels, table)


_CONSTELLATIONS = {
    "qpsk": _make("qpsk", 1, [-1, 1]),
    "16qam": _make("16qam", 2, [-3, -1, 1, 3]),
    "64qam": _make("64qam", 3, [-7, -5, -3, -1, 1, 3, 5, 7]),
}


def get_constellation(name: str) -> Constellation:
    try:
        return _CONSTELLATIONS[name.lower()]
    except KeyError:
        known = ", ".join(sorted(_CONSTELLATIONS))
        raise ValueError(f"unknown constellation {name!r}; known: {known}")


@dataclass(frozen=True)
class Mcs:
    """Modulation and coding scheme: constellation plus code rate."""

    constellation: str
    code_rate: Fraction

    def __post_init__(self) -> None:
        get_constellation(self.constellation)
        if self.code_rate not in (Fraction(1, 2), Fraction(2, 3)):
            raise ValueError("supported code rates: 1/2 and 2/3")

    @classmethod
    def parse(cls, text: str) -> "Mcs":
        """Parse forms like '16qam-1/2' or '64qam 2/3'."""
        parts = text.lower().replace(" ", "-").split("-")
        if len(parts) != 2:
            raise ValueError(f"cannot parse MCS {text!r}; expected '<mod>-<rate>'")
        num, den = parts[1].split("/")
        return cls(parts[0], Fraction(int(num), int(den)))

    def __str__(self) -> str:
        return f"{self.constellation}-{self.code_rate}"


def _axis_bits_to_levels(bits: np.ndarray, c: Constellation) -> np.ndarray:
    """(n, m) bit rows -> PAM level values via the Gray table."""
    weights = 1 << np.arange(c.bits_per_axis - 1, -1, -1)
    codes = bits @ weights
    lut = np.empty(len(c.levels))
    lut[c.bit_table @ weights] = c.levels
    return lut[codes]


def qam_map(bits: np.ndarray, constellation: Constellation | str) -> np.ndarray:
    """Map a bit array (multiple of bits_per_symbol) to complex symbols."""
    c = (
        get_constellation(constellation)
        if isinstance(constellation, str)
        else constellation
    )
    bits = np.asarray(bits).ravel()
    bps = c.bits_per_symbol
    if bits.size % bps != 0:
        raise ValueError(f"bit count {bits.size} not a multiple of {bps}")
    m = c.bits_per_axis
    grouped = bits.reshape(-1, bps)
    i_val = _axis_bits_to_levels(grouped[:, :m], c)
    q_val = _axis_bits_to_levels(grouped[:, m:], c)
    return i_val + 1j * q_val


def llr_demap(
    symbols: np.ndarray,
    noise_vars: np.ndarray | float,
    constellation: Constellation | str,
) -> np.ndarray:
    """Max-log LLRs, positive for bit 0, using per-symbol noise variances.

    Infinite noise variance (erased symbols) yields zero LLRs.
    """
    c = (
        get_constellation(constellation)
        if isinstance(constellation, str)
        else constellation
    )
    symbols = np.asarray(symbols).ravel()
    noise_vars = np.broadcast_to(np.asarray(noise_vars, dtype=float), symbols.shape)
    m = c.bits_per_axis
    out = np.empty((symbols.size, 2 * m))
    # Noiseless symbols get a tiny variance floor (huge finite LLRs);
    # erased symbols (infinite variance) get exactly zero LLRs.
    inv_var = np.where(
        np.isfinite(noise_vars), 1.0 / np.maximum(noise_vars, 1e-12), 0.0
    )
    for axis, vals in enumerate((symbols.real, symbols.imag)):
        dist = (vals[:, None] - c.levels[None, :]) ** 2
        for j in range(m):
            mask1 = c.bit_table[:, j].astype(bool)
            d0 = dist[:, ~mask1].min(axis=1)
            d1 = dist[:, mask1].min(axis=1)
            out[:, axis * m + j] = (d1 - d0) * inv_var
    return out.ravel()


def hard_decision(
    symbols: np.ndarray, constellation: Constellation | str
) -> np.ndarray:
    """Per-axis nearest-level decision (nearest constellation point)."""
    c = (
        get_constellation(constellation)
        if isinstance(constellation, str)
        else constellation
    )
    symbols = np.asarray(symbols)
    edges = (c.levels[:-1] + c.levels[1:]) / 2
    i_val = c.levels[np.searchsorted(edges, symbols.real)]
    q_val = c.levels[np.searchsorted(edges, symbols.imag)]
    return i_val + 1j * q_val


def soft_symbols(
    symbols: np.ndarray,
    noise_vars: np.ndarray | float,
    constellation: Constellation | str,
) -> np.ndarray:
    """Posterior-mean symbol estimates under per-symbol Gaussian noise.

    Separable per axis: E[c | y] = sum_c c w_c / sum_c w_c with
    w_c = exp(-(y - c)^2 / sigma^2). Vanishing noise variance reduces to the
    hard decision.
    """
    c = (
        get_constellation(constellation)
        if isinstance(constellation, str)
        else constellation
    )
    symbols = np.asarray(symbols)
    noise_vars = np.broadcast_to(np.asarray(noise_vars, dtype=float), symbols.shape)
    sigma2 = np.maximum(noise_vars, 1e-12)

    def axis_mean(vals: np.ndarray) -> np.ndarray:
        dist = (vals[..., None] - c.levels) ** 2
        dist = dist - dist.min(axis=-1, keepdims=True)
        w = np.exp(-dist / sigma2[..., None])
        return (w @ c.levels) / w.sum(axis=-1)

    return axis_mean(symbols.real) + 1j * axis_mean(symbols.imag)

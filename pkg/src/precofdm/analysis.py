"""Spectrum and envelope analysis: analytic and Welch PSD, OOB metrics,
PAPR CCDF.

PSD values are reported in dBr: dB relative to the mean in-band PSD of the
plain (unprecoded, unfiltered) OFDM signal of the same profile, so curve
readings translate directly into "reduction compared to OFDM".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from .filters import FirFilter, IirFilter, filter_gain
from .numerology import Numerology, SubcarrierAllocation
from .precoding import Projector, subcarrier_kernel
from .waveform import TimeSignal

__all__ = [
    "PsdCurve",
    "PaprCcdf",
    "OobReport",
    "default_psd_grid",
    "in_band_mask",
    "analytic_psd",
    "welch_psd",
    "oob_report",
    "papr_ccdf",
    "papr_at",
]

PSD_FLOOR_DBR = -160.0


@dataclass(frozen=True)
class PsdCurve:
    """PSD samples in dBr on a strictly increasing frequency grid."""

    freqs: np.ndarray
    values_dbr: np.ndarray

    def __post_init__(self) -> None:
        if np.any(np.diff(self.freqs) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        if self.freqs.shape != self.values_dbr.shape:
            raise ValueError("freqs and values must have matching shape")

    def at(self, freq: float) -> float:
        """Linearly interpolated dBr value at one frequency."""
        if freq < self.freqs[0] or freq > self.freqs[-1]:
            raise ValueError(f"frequency {freq} outside PSD range")
        return float(np.interp(freq, self.freqs, self.values_dbr))


def default_psd_grid(
    num: Numerology,
    alloc: SubcarrierAllocation,
    span_factor: float = 1.5,
    points_per_spacing: int = 10,
) -> np.ndarray:
    """Symmetric evaluation grid: `points_per_spacing` points per subcarrier
    spacing across +/- span_factor times the occupied-band edge."""
    df = num.subcarrier_spacing
    edge = max(abs(alloc.indices[0]), abs(alloc.indices[-1])) * df + df / 2
    span = span_factor * edge
    step = df / points_per_spacing
    n = int(np.ceil(span / step))
    return np.arange(-n, n + 1) * step


def in_band_mask(
    num: Numerology, alloc: SubcarrierAllocation, freqs: np.ndarray
) -> np.ndarray:
    """True where a frequency falls within +/- spacing/2 of an active
    subcarrier (holes of fragmented allocations are excluded)."""
    df = num.subcarrier_spacing
    centers = alloc.as_array() * df
    edges = np.concatenate([centers - df / 2, [centers[-1] + df / 2]])
    # Active cells are [k-df/2, k+df/2]; a gap in `centers` leaves holes out.
    idx = np.searchsorted(centers, freqs)
    near_left = np.abs(freqs - np.take(centers, np.clip(idx - 1, 0, None))) <= df / 2
    near_right = np.abs(
        freqs - np.take(centers, np.clip(idx, None, len(centers) - 1))
    ) <= df / 2
    del edges
    return near_left | near_right


def _ensemble_psd(
    num: Numerology,
    alloc: SubcarrierAllocation,
    p: Projector | None,
    freqs: np.ndarray,
) -> np.ndarray:
    """Exact ensemble PSD (linear units) of the precoded OFDM signal:
    (1/T_o) a(f)^H G a(f) with unit-power independent data symbols."""
    a = subcarrier_kernel(num, alloc, freqs)  # (F, K)
    total = np.sum(np.abs(a) ** 2, axis=1)
    if p is not None:
        # The ensemble PSD is a(f)^T G a(f)* with G = I - U U^H, U an
        # orthonormal basis of span{A^H}; the subtracted term is |a^T U|^2.
        proj = a @ p.removed_basis
        total = total - np.sum(np.abs(proj) ** 2, axis=1)
        total = np.maximum(total, 0.0)
    return total / num.symbol_duration


def analytic_psd(
    num: Numerology,
    alloc: SubcarrierAllocation,
    p: Projector | None,
    freqs: np.ndarray,
    filt: FirFilter | IirFilter | None = None,
) -> PsdCurve:
    """Analytic PSD in dBr; `p=None` gives the plain OFDM sinc-sum.

    With `filt` the PSD is multiplied by the filter's squared magnitude
    response (LTI shaping of the symbol stream). The dBr reference is always
    the unfiltered, unprecoded in-band mean of the same profile.
    """
    freqs = np.asarray(freqs, dtype=float)
    psd = _ensemble_psd(num, alloc, p, freqs)
    if filt is not None:
        psd = psd * np.abs(filter_gain(filt, freqs, num.sample_rate)) ** 2
    mask = in_band_mask(num, alloc, freqs)
    if not np.any(mask):
        raise ValueError("PSD grid does not cover the occupied band")
    ref = float(np.mean(_ensemble_psd(num, alloc, None, freqs[mask])))
    with np.errstate(divide="ignore"):
        dbr = 10.0 * np.log10(psd / ref)
    return PsdCurve(freqs, np.maximum(dbr, PSD_FLOOR_DBR))


def welch_psd(
    sig: TimeSignal,
    nfft: int,
    overlap_fraction: float = 0.5,
    window: str = "hann",
    ref_density: float | None = None,
    in_band: tuple[float, float] | None = None,
) -> PsdCurve:
    """Welch-averaged periodogram of a baseband signal, in dBr.

    The 0 dBr reference is `ref_density` when given (the in-band mean
    density of a plain-OFDM reference run, in the same linear units);
    otherwise the curve's own mean density over `in_band` (Hz interval).
    One of the two must be provided.
    """
    x = sig.samples
    if overlap_fraction >= 1 or overlap_fraction < 0:
        raise ValueError("overlap_fraction must be in [0, 1)")
    noverlap = int(round(nfft * overlap_fraction))
    if len(x) < 4 * (nfft - noverlap) + noverlap:
        raise ValueError("signal too short for at least 4 Welch segments")
    freqs, density = scipy.signal.welch(
        x,
        fs=sig.sample_rate,
        window=window,
        nperseg=nfft,
        noverlap=noverlap,
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    freqs = np.fft.fftshift(freqs)
    density = np.fft.fftshift(density)
    if ref_density is None:
        if in_band is None:
            raise ValueError("need ref_density or in_band to set the 0 dBr level")
        mask = (freqs >= in_band[0]) & (freqs <= in_band[1])
        if not np.any(mask):
            raise ValueError("in_band interval outside the estimated grid")
        ref_density = float(np.mean(density[mask]))
    with np.errstate(divide="ignore"):
        dbr = 10.0 * np.log10(density / ref_density)
    return PsdCurve(freqs, np.maximum(dbr, PSD_FLOOR_DBR))


def mean_in_band_density(
    sig: TimeSignal,
    nfft: int,
    in_band: tuple[float, float],
    overlap_fraction: float = 0.5,
    window: str = "hann",
) -> float:
    """Mean Welch density of `sig` over an interval, for use as a dBr ref."""
    noverlap = int(round(nfft * overlap_fraction))
    freqs, density = scipy.signal.welch(
        sig.samples,
        fs=sig.sample_rate,
        window=window,
        nperseg=nfft,
        noverlap=noverlap,
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    freqs = np.fft.fftshift(freqs)
    density = np.fft.fftshift(density)
    mask = (freqs >= in_band[0]) & (freqs <= in_band[1])
    return float(np.mean(density[mask]))


@dataclass(frozen=True)
class OobReport:
    """Out-of-band metrics of a PSD against a reference PSD."""

    probe_freqs: np.ndarray
    probe_reduction_db: np.ndarray
    bands: tuple[tuple[float, float], ...]
    band_reduction_db: np.ndarray
    notch_depth_db: np.ndarray


def oob_report(
    psd: PsdCurve,
    ref_psd: PsdCurve,
    probes=(),
    bands=(),
) -> OobReport:
    """Reductions of `psd` below `ref_psd`.

    Per probe frequency: pointwise reduction in dB. Per (lo, hi) band:
    integrated-power reduction (ACLR-style ratio of band powers) and notch
    depth (maximum pointwise reduction inside the band).
    """
    probes = np.asarray(list(probes), dtype=float)
    probe_red = np.array([ref_psd.at(f) - psd.at(f) for f in probes])
    band_red = []
    depth = []
    for lo, hi in bands:
        mask = (psd.freqs >= lo) & (psd.freqs <= hi)
        if not np.any(mask):
            raise ValueError(f"band ({lo}, {hi}) outside PSD grid")
        f_band = psd.freqs[mask]
        p_lin = 10 ** (psd.values_dbr[mask] / 10)
        r_dbr = np.array([ref_psd.at(f) for f in f_band])
        r_lin = 10 ** (r_dbr / 10)
        band_red.append(10 * np.log10(np.trapz(r_lin, f_band) / np.trapz(p_lin, f_band)))
        depth.append(float(np.max(r_dbr - psd.values_dbr[mask])))
    return OobReport(
        probes,
        probe_red,
        tuple(tuple(b) for b in bands),
        np.asarray(band_red),
        np.asarray(depth),
    )


@dataclass(frozen=True)
class PaprCcdf:
    """Complementary CDF of per-symbol PAPR."""

    thresholds_db: np.ndarray
    exceed_prob: np.ndarray

    def __post_init__(self) -> None:
        if np.any(np.diff(self.exceed_prob) > 0):
            raise ValueError("exceedance probability must be non-increasing")


def papr_ccdf(
    sig: TimeSignal,
    oversample: int = 4,
    thresholds_db: np.ndarray | None = None,
) -> PaprCcdf:
    """Per-symbol PAPR CCDF on the oversampled envelope.

    Each symbol's useful part is oversampled by zero-padding its spectrum
    before measuring peak/mean power, so intersample peaks are captured.
    """
    if oversample < 4:
        raise ValueError("oversample must be >= 4")
    if len(sig.symbol_starts) < 2:
        raise ValueError("need per-symbol boundaries (>= 2 symbols)")
    spacing = np.diff(sig.symbol_starts)
    length = int(spacing[0])
    useful = None
    # Infer the useful length from the boundary spacing; the CP is the
    # leading portion of each block.
    n_sym = len(sig.symbol_starts)
    paprs = np.empty(n_sym)
    for i, start in enumerate(sig.symbol_starts):
        block = sig.samples[start : start + length]
        if len(block) < length:
            raise ValueError("signal truncated before the last symbol end")
        if useful is None:
            useful = length - _infer_cp(sig, length)
        x = block[length - useful :]
        spec = np.fft.fft(x)
        padded = np.zeros(useful * oversample, dtype=complex)
        half = useful // 2
        padded[:half] = spec[:half]
        padded[-(useful - half) :] = spec[half:]
        env = np.fft.ifft(padded) * oversample
        power = np.abs(env) ** 2
        paprs[i] = np.max(power) / np.mean(power)
    papr_db = 10 * np.log10(paprs)
    if thresholds_db is None:
        thresholds_db = np.arange(0.0, max(12.5, papr_db.max() + 0.5), 0.05)
    exceed = np.array([np.mean(papr_db > t) for t in thresholds_db])
    return PaprCcdf(np.asarray(thresholds_db), exceed)


def _infer_cp(sig: TimeSignal, block_len: int) -> int:
    # The waveform module stores symbol starts at each CP start; the CP is
    # block_len - fft_size, recovered from the sample-rate/grid metadata.
    if sig.fft_size is None:
        return 0
    return block_len - sig.fft_size


def papr_at(ccdf: PaprCcdf, prob: float) -> float:
    """PAPR threshold (dB) where the CCDF crosses `prob` (interpolated)."""
    exceed = ccdf.exceed_prob
    if prob > exceed[0] or prob < exceed[-1]:
        raise ValueError(f"probability {prob} outside the estimated CCDF range")
    # exceed is non-increasing: interpolate on the flipped arrays.
    return float(np.interp(prob, exceed[::-1], ccdf.thresholds_db[::-1]))

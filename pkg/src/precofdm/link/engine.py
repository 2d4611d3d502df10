"""Coded link-level BER experiments.

The chain per trial (one codeword): random bits -> convolutional encoding
(tail-terminated, optional 2/3 puncturing) -> block interleaving -> QAM
mapping -> optional DFT spreading (SC-FDMA profiles) -> optional spectral
precoding (per antenna) -> optional MRT spatial precoding -> OFDM
modulation -> optional low-pass transmit filter -> AWGN or quasi-static EVA
channel -> single-tap ZF with the effective channel -> matched-filter
projection + iterative detection (precoded chains) -> max-log demapping ->
Viterbi decoding -> bit-error counting.

One guard symbol of random data precedes and follows each codeword so
filter and channel transients hit steady-state signal, not silence.

Determinism: every random draw flows from `default_rng([seed, point, trial])`,
and error counts are order-independent integer sums, so a (scenario, seed)
pair fixes the resulting curve regardless of threading.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .. import channel as ch
from ..filters import (
    FirFilter,
    IirFilter,
    apply_filter,
    effective_channel,
    filter_gain,
    make_preset,
)
from ..numerology import build_profile, is_scfdma_profile
from ..precoding import (
    ConstraintMatrix,
    Projector,
    build_projector,
    continuity_constraints,
    notch_constraints,
    precode,
    stack,
)
from ..waveform import dft_despread, dft_spread, ofdm_demodulate, ofdm_modulate
from .coding import conv_encode, info_length, interleaver, viterbi_decode_batch
from .detection import iterative_detect, mrt_precode, zf_equalize
from .mapping import Mcs, get_constellation, hard_decision, llr_demap, qam_map, soft_symbols

__all__ = [
    "PrecoderSpec",
    "LinkScenario",
    "BerCurve",
    "build_precoder",
    "run_link",
    "snr_at_ber",
]

# Trials are front-ended in fixed-size groups so the Viterbi decoder can
# run batched; the group size is a constant so results stay reproducible.
_TRIAL_BATCH = 16

# Fraction of the per-bin distortion variance diag(I - G) added to the
# demapper noise when the distortion prior is enabled.
_DISTORTION_PRIOR_WEIGHT = 0.5


@dataclass(frozen=True)
class PrecoderSpec:
    """Declarative precoder configuration resolved against a profile."""

    kind: str = "none"  # none | continuity | notch | stacked
    order: int | None = None
    notches: tuple[float, ...] = ()
    parts: tuple["PrecoderSpec", ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("none", "continuity", "notch", "stacked"):
            raise ValueError(f"unknown precoder kind {self.kind!r}")
        if self.kind == "continuity" and (self.order is None or self.order < 0):
            raise ValueError("continuity precoder needs order >= 0")
        if self.kind == "notch" and not self.notches:
            raise ValueError("notch precoder needs at least one frequency")
        if self.kind == "stacked" and len(self.parts) < 1:
            raise ValueError("stacked precoder needs parts")


def _build_constraint(spec: PrecoderSpec, num, alloc) -> ConstraintMatrix:
    if spec.kind == "continuity":
        return continuity_constraints(num, alloc, spec.order)
    if spec.kind == "notch":
        return notch_constraints(num, alloc, np.asarray(spec.notches))
    if spec.kind == "stacked":
        return stack([_build_constraint(p, num, alloc) for p in spec.parts])
    raise ValueError(f"no constraint for kind {spec.kind!r}")


def build_precoder(spec: PrecoderSpec, num, alloc) -> Projector | None:
    if spec.kind == "none":
        return None
    return build_projector(_build_constraint(spec, num, alloc))


@dataclass(frozen=True)
class LinkScenario:
    """Complete description of one BER experiment."""

    profile: str
    precoder: PrecoderSpec = PrecoderSpec()
    filter_preset: str | None = None
    channel: str = "awgn"
    mcs: Mcs = field(default_factory=lambda: Mcs("qpsk", Fraction(1, 2)))
    n_tx: int = 1
    snr_grid: tuple[float, ...] = ()
    min_bit_errors: int = 200
    max_bits: int = 2_000_000
    seed: int = 0
    symbols_per_codeword: int = 4
    guard_pulses: int = 2
    detector_mode: str = "soft"
    detector_iters: int = 10
    detector_weighted: bool = True
    # Weight LLRs by the precoder's per-bin distortion profile diag(I - G):
    # any unrecovered projection distortion is treated as extra noise, with
    # the residual level estimated per codeword from the detector output.
    demap_distortion_prior: bool = True
    scenario_id: str = ""

    def __post_init__(self) -> None:
        if not self.snr_grid:
            raise ValueError("snr_grid must be nonempty")
        if self.min_bit_errors <= 0 or self.max_bits <= 0:
            raise ValueError("termination bounds must be positive")
        if self.channel not in ("awgn", "eva"):
            raise ValueError(f"unknown channel {self.channel!r}")
        if self.n_tx < 1:
            raise ValueError("n_tx must be >= 1")
        if self.symbols_per_codeword < 1:
            raise ValueError("symbols_per_codeword must be >= 1")


@dataclass(frozen=True)
class BerCurve:
    """Measured coded BER per SNR point."""

    snr_db: np.ndarray
    ber: np.ndarray
    bits_counted: np.ndarray
    errors_counted: np.ndarray


class _Chain:
    """Scenario state shared by every trial (immutable after setup)."""

    def __init__(self, sc: LinkScenario):
        self.sc = sc
        self.num, self.alloc = build_profile(sc.profile)
        self.scfdma = is_scfdma_profile(sc.profile)
        self.constellation = get_constellation(sc.mcs.constellation)
        self.rate = sc.mcs.code_rate
        self.projector = build_precoder(sc.precoder, self.num, self.alloc)
        self.filt: FirFilter | IirFilter | None = None
        if sc.filter_preset and sc.filter_preset != "none":
            if abs(self.num.sample_rate - 15.36e6) > 1e-3:
                raise ValueError(
                    f"filter preset {sc.filter_preset!r} is calibrated for the "
                    f"15.36 MHz grids, profile {sc.profile!r} is not"
                )
            self.filt = make_preset(sc.filter_preset, self.num.sample_rate)
        self.filter_delay = self.filt.nominal_delay if self.filt else 0
        self.guard_symbols = self.filt is not None

        k = self.num.subcarrier_count
        g = sc.guard_pulses
        if self.scfdma:
            if 2 * g >= k:
                raise ValueError("guard_pulses too large for the block size")
            self.n_data = k - 2 * g
        else:
            self.n_data = k
        bps = self.constellation.bits_per_symbol
        self.n_coded = sc.symbols_per_codeword * self.n_data * bps
        self.k_info = info_length(self.n_coded, self.rate)
        self.perm = interleaver(self.n_coded)
        self.profile_indices = self.alloc.as_array()
        self.eva = ch.eva_profile() if sc.channel == "eva" else None
        if self.projector is not None:
            # Per-bin transmit distortion variance diag(I - G) for unit-power
            # symbols, computed from the factored form.
            p = self.projector
            self.distortion_diag = np.real(
                np.einsum("km,mk->k", p.t_matrix, p.a_eff)
            )
        else:
            self.distortion_diag = None
        # Pulse-domain decision for SC-FDMA detection: decide in the pulse
        # domain, keep the guards at zero, respread.
        if self.scfdma and self.projector is not None:
            q = k

            def pulse_psi_factory(noise_var_pulse, mode):
                def psi(x):
                    pulses = dft_despread(x)
                    if mode == "hard":
                        dec = hard_decision(pulses, self.constellation)
                    else:
                        dec = soft_symbols(pulses, noise_var_pulse, self.constellation)
                    dec[..., :g] = 0
                    dec[..., q - g :] = 0
                    return dft_spread(dec)

                return psi

            self.pulse_psi_factory = pulse_psi_factory
        else:
            self.pulse_psi_factory = None

    # -- per-trial pieces ---------------------------------------------------

    def _spread(self, data_syms: np.ndarray) -> np.ndarray:
        if not self.scfdma:
            return data_syms
        g = self.sc.guard_pulses
        pulses = np.zeros(
            (data_syms.shape[0], self.num.subcarrier_count), dtype=complex
        )
        pulses[:, g : g + self.n_data] = data_syms
        return dft_spread(pulses, g)

    def _useful_power(self, sig) -> float:
        """Mean power over the useful (non-CP) part of every symbol."""
        l_fft = self.num.fft_size
        idx = sig.symbol_starts[:, None] + self.num.cp_samples + np.arange(l_fft)
        return float(np.mean(np.abs(sig.samples[idx]) ** 2))

    def _transmit(
        self,
        grid: np.ndarray,
        rng_channel: np.random.Generator,
        rng_noise: np.random.Generator,
        snr_db,
    ):
        """Modulate (per antenna for MISO), pass the channel, demodulate.

        Returns (rx_grid, h_eff, noise_var_per_sample). The AWGN reference
        power is the mean useful-part power of the transmitted (filtered)
        signal, summed over antennas.
        """
        num, alloc = self.num, self.alloc
        n_tx = self.sc.n_tx
        l_fft = num.fft_size
        if n_tx == 1:
            if self.projector is not None:
                grid = precode(self.projector, grid)
            sig = ofdm_modulate(num, alloc, grid)
            if self.filt is not None:
                sig = apply_filter(self.filt, sig)
            ref_power = self._useful_power(sig)
            if self.eva is not None:
                cir = ch.realize(self.eva, num.sample_rate, rng_channel).cir
                sig = ch.apply_channel(cir, sig)
            else:
                cir = np.ones(1, dtype=complex)
            sig = ch.add_awgn(sig, snr_db, ref_power, rng_noise)
            rx = ofdm_demodulate(num, alloc, sig)
            h_eff = ch.freq_response(
                effective_channel(self.filt, cir),
                self.profile_indices,
                l_fft,
                shift=self.filter_delay,
            )
        else:
            if self.eva is None:
                h = np.ones((num.subcarrier_count, n_tx), dtype=complex)
                cirs = [np.ones(1, dtype=complex)] * n_tx
            else:
                h, reals = ch.miso_channel(
                    self.eva,
                    n_tx,
                    num.sample_rate,
                    self.profile_indices,
                    l_fft,
                    rng_channel,
                )
                cirs = [r.cir for r in reals]
            w = mrt_precode(h)  # (K, n_tx)
            total = None
            ref_power = 0.0
            for i in range(n_tx):
                ant = grid * w[None, :, i]
                if self.projector is not None:
                    ant = precode(self.projector, ant)
                sig_i = ofdm_modulate(num, alloc, ant)
                if self.filt is not None:
                    sig_i = apply_filter(self.filt, sig_i)
                ref_power += self._useful_power(sig_i)
                rx_i = ch.apply_channel(cirs[i], sig_i)
                total = rx_i if total is None else total.with_samples(
                    total.samples + rx_i.samples
                )
            sig = ch.add_awgn(total, snr_db, ref_power, rng_noise)
            rx = ofdm_demodulate(num, alloc, sig)
            # Ideal post-MRT scalar channel per subcarrier.
            h_eff = np.linalg.norm(h, axis=1).astype(complex)
            if self.filt is not None:
                h_eff = h_eff * filter_gain(
                    self.filt,
                    self.profile_indices * num.subcarrier_spacing,
                    num.sample_rate,
                )
        if snr_db is None or np.isinf(snr_db):
            base_var = 0.0
        else:
            base_var = ref_power / 10 ** (snr_db / 10)
        return rx, h_eff, base_var

    def run_trial(
        self, snr_db: float, point_idx: int, trial_idx: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """One codeword through the chain; returns (tx_bits, coded LLRs).

        Data, channel and noise use separate substreams of the per-trial
        seed, so chain variants run over identical channel realizations
        (paired comparisons) no matter how many data bits each consumes.
        """
        sc = self.sc
        key = [sc.seed, point_idx, trial_idx]
        rng_data = np.random.default_rng(key + [0])
        rng_channel = np.random.default_rng(key + [1])
        rng_noise = np.random.default_rng(key + [2])
        c = self.constellation
        bps = c.bits_per_symbol
        s_payload = sc.symbols_per_codeword

        bits = rng_data.integers(0, 2, self.k_info, dtype=np.uint8)
        coded = conv_encode(bits, self.rate)
        tx_stream = coded[self.perm]
        payload = qam_map(tx_stream, c).reshape(s_payload, self.n_data)
        if self.guard_symbols:
            # Random data symbols before and after the codeword keep filter
            # transients fed with steady-state signal.
            guard_bits = rng_data.integers(
                0, 2, 2 * self.n_data * bps, dtype=np.uint8
            )
            guards = qam_map(guard_bits, c).reshape(2, self.n_data)
            data_syms = np.vstack([guards[:1], payload, guards[1:]])
        else:
            data_syms = payload

        grid = self._spread(data_syms)
        rx, h_eff, base_var = self._transmit(grid, rng_channel, rng_noise, snr_db)

        eq, noise_scale = zf_equalize(rx, h_eff)
        # Erased bins stay erased (infinite variance) even at infinite SNR.
        noise_var = np.where(
            np.isinf(noise_scale),
            np.inf,
            base_var * np.where(np.isinf(noise_scale), 1.0, noise_scale),
        )
        if self.guard_symbols:
            eq = eq[1:-1]

        if self.projector is not None:
            psi = None
            if self.pulse_psi_factory is not None:
                pulse_var = float(np.mean(noise_var[np.isfinite(noise_var)]))
                psi = self.pulse_psi_factory(pulse_var, sc.detector_mode)
            d_hat, _ = iterative_detect(
                self.projector,
                eq,
                noise_var,
                c,
                max_iters=sc.detector_iters,
                mode=sc.detector_mode,
                psi=psi,
                weighted=sc.detector_weighted,
            )
        else:
            d_hat = eq

        demap_var = noise_var
        if (
            self.projector is not None
            and sc.demap_distortion_prior
            and self.distortion_diag is not None
        ):
            demap_var = noise_var + _DISTORTION_PRIOR_WEIGHT * self.distortion_diag

        if self.scfdma:
            pulses = dft_despread(d_hat)
            g = sc.guard_pulses
            rx_syms = pulses[:, g : g + self.n_data]
            finite = demap_var[np.isfinite(demap_var)]
            sym_var = np.full(rx_syms.shape, float(np.mean(finite)))
        else:
            rx_syms = d_hat
            sym_var = np.broadcast_to(demap_var, rx_syms.shape)

        llr_stream = llr_demap(rx_syms.ravel(), sym_var.ravel(), c)
        llrs = np.empty(self.n_coded)
        llrs[self.perm] = llr_stream
        return bits, llrs


def _run_point(chain: _Chain, point_idx: int, snr_db: float):
    sc = chain.sc
    errors = 0
    bits_total = 0
    trial = 0
    while errors < sc.min_bit_errors and bits_total < sc.max_bits:
        tx_bits = []
        llr_rows = []
        for _ in range(_TRIAL_BATCH):
            b, l = chain.run_trial(snr_db, point_idx, trial)
            tx_bits.append(b)
            llr_rows.append(l)
            trial += 1
        decoded = viterbi_decode_batch(np.asarray(llr_rows), chain.rate)
        tx = np.asarray(tx_bits)
        errors += int(np.sum(decoded != tx))
        bits_total += tx.size
    return float(snr_db), errors / bits_total, bits_total, errors


def run_link(sc: LinkScenario, threads: int = 1) -> BerCurve:
    """Run the scenario over its SNR grid; stops each point at
    min_bit_errors or max_bits, whichever comes first."""
    chain = _Chain(sc)
    points = list(enumerate(sc.snr_grid))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(lambda p: _run_point(chain, p[0], p[1]), points)
            )
    else:
        results = [_run_point(chain, i, s) for i, s in points]
    snr, ber, bits, errs = zip(*results)
    return BerCurve(
        np.asarray(snr),
        np.asarray(ber),
        np.asarray(bits, dtype=np.int64),
        np.asarray(errs, dtype=np.int64),
    )


def snr_at_ber(curve: BerCurve, target: float) -> float:
    """SNR where the curve crosses `target` BER (log-linear interpolation).

    The grid must bracket the target; zero-error points are floored at half
    an error for interpolation purposes.
    """
    order = np.argsort(curve.snr_db)
    snr = curve.snr_db[order]
    ber = np.maximum(curve.ber[order], 0.5 / np.maximum(curve.bits_counted[order], 1))
    logb = np.log10(ber)
    logt = np.log10(target)
    for i in range(len(snr) - 1):
        lo, hi = logb[i], logb[i + 1]
        if (lo - logt) * (hi - logt) <= 0 and lo != hi:
            return float(snr[i] + (snr[i + 1] - snr[i]) * (logt - lo) / (hi - lo))
    raise ValueError(f"BER curve does not cross {target}")

"""Convolutional channel code: rate-1/2 K=7 (133, 171) mother code,
tail-terminated, with rate-2/3 puncturing and a block interleaver.

The decoder is a max-log Viterbi operating on LLRs (positive = bit 0);
punctured positions are restored with zero LLR. A batched variant decodes
many codewords at once, which is what the link engine uses for speed.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

__all__ = [
    "CONSTRAINT_LENGTH",
    "GENERATORS",
    "conv_encode",
    "viterbi_decode",
    "viterbi_decode_batch",
    "coded_length",
    "info_length",
    "interleaver",
]

CONSTRAINT_LENGTH = 7
GENERATORS = (0o133, 0o171)
_N_STATES = 1 << (CONSTRAINT_LENGTH - 1)
_TAIL = CONSTRAINT_LENGTH - 1

# Puncturing pattern for rate 2/3 from the rate-1/2 mother code: over two
# trellis steps (outputs c0 c1 c0 c1) transmit c0 c1 c0, drop the last c1.
_PUNCTURE_23 = np.array([1, 1, 1, 0], dtype=bool)

RATE_HALF = Fraction(1, 2)
RATE_TWO_THIRDS = Fraction(2, 3)


def _taps(gen: int) -> np.ndarray:
    return np.array(
        [(gen >> (CONSTRAINT_LENGTH - 1 - i)) & 1 for i in range(CONSTRAINT_LENGTH)],
        dtype=np.uint8,
    )


def _check_rate(rate: Fraction) -> Fraction:
    rate = Fraction(rate)
    if rate not in (RATE_HALF, RATE_TWO_THIRDS):
        raise ValueError(f"unsupported code rate {rate}; use 1/2 or 2/3")
    return rate


def coded_length(n_info: int, rate: Fraction) -> int:
    """Transmitted bits for `n_info` information bits (tail included)."""
    rate = _check_rate(rate)
    steps = n_info + _TAIL
    if rate == RATE_HALF:
        return 2 * steps
    if steps % 2 != 0:
        raise ValueError("rate 2/3 needs an even number of trellis steps")
    return 3 * steps // 2


def info_length(n_coded: int, rate: Fraction) -> int:
    """Information bits that fit exactly into `n_coded` transmitted bits."""
    rate = _check_rate(rate)
    if rate == RATE_HALF:
        if n_coded % 2 != 0:
            raise ValueError("rate 1/2 coded length must be even")
        n = n_coded // 2 - _TAIL
    else:
        if n_coded % 3 != 0:
            raise ValueError("rate 2/3 coded length must be divisible by 3")
        n = 2 * n_coded // 3 - _TAIL
    if n <= 0:
        raise ValueError(f"coded length {n_coded} too short for the tail")
    if coded_length(n, rate) != n_coded:
        raise ValueError(f"coded length {n_coded} infeasible at rate {rate}")
    return n


def conv_encode(bits: np.ndarray, rate: Fraction = RATE_HALF) -> np.ndarray:
    """Encode with tail termination; rate 2/3 is punctured from 1/2."""
    rate = _check_rate(rate)
    bits = np.asarray(bits).ravel().astype(np.uint8)
    if bits.size == 0:
        raise ValueError("cannot encode an empty bit array")
    padded = np.concatenate([bits, np.zeros(_TAIL, dtype=np.uint8)])
    out = np.empty(2 * padded.size, dtype=np.uint8)
    for j, gen in enumerate(GENERATORS):
        c = np.convolve(padded, _taps(gen))[: padded.size] % 2
        out[j::2] = c
    if rate == RATE_TWO_THIRDS:
        if padded.size % 2 != 0:
            raise ValueError("rate 2/3 needs an even number of trellis steps")
        out = out[np.resize(_PUNCTURE_23, out.size)]
    return out


def _depuncture(llrs: np.ndarray, rate: Fraction) -> np.ndarray:
    if rate == RATE_HALF:
        return llrs
    n_coded = llrs.shape[-1]
    if n_coded % 3 != 0:
        raise ValueError("rate 2/3 LLR length must be divisible by 3")
    full = np.zeros(llrs.shape[:-1] + (n_coded // 3 * 4,), dtype=float)
    mask = np.resize(_PUNCTURE_23, full.shape[-1])
    full[..., mask] = llrs
    return full


def _trellis():
    """Per next-state predecessor structure for the batched update."""
    states = np.arange(_N_STATES)
    out = np.empty((_N_STATES, 2, 2), dtype=np.uint8)
    next_state = np.empty((_N_STATES, 2), dtype=np.int64)
    for b in (0, 1):
        reg = (b << (CONSTRAINT_LENGTH - 1)) | states
        for j, gen in enumerate(GENERATORS):
            out[:, b, j] = np.array(
                [bin(int(r) & gen).count("1") & 1 for r in reg], dtype=np.uint8
            )
        next_state[:, b] = (states >> 1) | (b << (CONSTRAINT_LENGTH - 2))
    # Predecessors of next state ns: ((ns & 31) << 1) + {0, 1}, input ns >> 5.
    ns = np.arange(_N_STATES)
    pred_a = (ns & (_N_STATES // 2 - 1)) << 1
    pred_b = pred_a + 1
    bit_in = ns >> (CONSTRAINT_LENGTH - 2)
    out_a = out[pred_a, bit_in]  # (64, 2) coded bits on branch from pred_a
    out_b = out[pred_b, bit_in]
    return pred_a, pred_b, bit_in, out_a.astype(float), out_b.astype(float)


_PRED_A, _PRED_B, _BIT_IN, _OUT_A, _OUT_B = _trellis()


def viterbi_decode_batch(llrs: np.ndarray, rate: Fraction = RATE_HALF) -> np.ndarray:
    """Max-log Viterbi over a (B, n_coded) LLR batch -> (B, n_info) bits.

    Assumes tail-terminated codewords (start and end in the zero state).
    """
    rate = _check_rate(rate)
    llrs = np.atleast_2d(np.asarray(llrs, dtype=float))
    full = _depuncture(llrs, rate)
    n_steps = full.shape[-1] // 2
    batch = full.shape[0]
    # Branch cost of a coded bit c under llr l (= log p0 - log p1): c * l,
    # so minimizing the path metric favors the likelier bits.
    l0 = full[:, 0::2]
    l1 = full[:, 1::2]
    pm = np.full((batch, _N_STATES), np.inf)
    pm[:, 0] = 0.0
    decisions = np.empty((n_steps, batch, _N_STATES), dtype=bool)
    for t in range(n_steps):
        cost_a = l0[:, t, None] * _OUT_A[:, 0] + l1[:, t, None] * _OUT_A[:, 1]
        cost_b = l0[:, t, None] * _OUT_B[:, 0] + l1[:, t, None] * _OUT_B[:, 1]
        m_a = pm[:, _PRED_A] + cost_a
        m_b = pm[:, _PRED_B] + cost_b
        take_b = m_b < m_a
        decisions[t] = take_b
        pm = np.where(take_b, m_b, m_a)
        pm -= pm.min(axis=1, keepdims=True)
    # Traceback from the zero state (tail termination).
    state = np.zeros(batch, dtype=np.int64)
    rows = np.arange(batch)
    bits = np.empty((batch, n_steps), dtype=np.uint8)
    for t in range(n_steps - 1, -1, -1):
        bits[:, t] = _BIT_IN[state]
        sel_b = decisions[t, rows, state]
        state = np.where(sel_b, _PRED_B[state], _PRED_A[state])
    return bits[:, : n_steps - _TAIL]


def viterbi_decode(llrs: np.ndarray, rate: Fraction = RATE_HALF) -> np.ndarray:
    """Decode a single codeword's LLRs to information bits."""
    return viterbi_decode_batch(np.asarray(llrs).reshape(1, -1), rate)[0]


def interleaver(n: int, depth: int = 32) -> np.ndarray:
    """Block-interleaver permutation: position j transmits coded bit perm[j].

    Coded bits are written row-wise into `depth` columns and read
    column-wise, so trellis-adjacent bits end up ~n/depth apart in the
    transmitted stream.
    """
    if n <= 0:
        raise ValueError("interleaver length must be positive")
    rows = -(-n // depth)
    idx = np.arange(rows * depth).reshape(rows, depth).T.ravel()
    return idx[idx < n]

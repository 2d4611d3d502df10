"""Constraint matrices and orthogonal projection precoders.

A precoder is the orthogonal projection G = I - A^H (A A^H)^-1 A onto the
nullspace of an M x K constraint matrix A. Data vectors projected with G
satisfy every constraint row exactly (A G = 0) while suffering the minimum
possible distortion ||Gd - d||.

Two constraint families are provided:
- edge-derivative (continuity) rows, forcing the symbol waveform and its
  first N derivatives to zero at both ends of the CP-extended symbol, which
  makes consecutive symbols N-continuous without cross-symbol memory;
- frequency-notch rows, forcing the per-symbol continuous spectrum to zero
  at chosen frequencies (in-band or out-of-band).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .numerology import Numerology, SubcarrierAllocation

__all__ = [
    "ConstraintMatrix",
    "Projector",
    "DistortionReport",
    "OpCounter",
    "subcarrier_kernel",
    "continuity_constraints",
    "notch_constraints",
    "stack",
    "build_projector",
    "precode",
    "distortion",
    "rate_loss",
]

# Relative singular-value threshold below which constraint rows are treated
# as linearly dependent and dropped.
RANK_TOL = 1e-10

# Dense K x K projector matrices are only materialized up to this size.
DENSE_G_MAX_K = 4096


def _normalize_rows(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scales = np.linalg.norm(rows, axis=1)
    if np.any(scales == 0):
        raise ValueError("constraint matrix contains an all-zero row")
    return rows / scales[:, None], scales


@dataclass(frozen=True)
class ConstraintMatrix:
    """M x K complex constraint matrix with unit-normalized rows.

    `kind` is a human-readable descriptor of how the rows were built;
    `row_scales` are the positive norms divided out of the raw rows.
    """

    entries: np.ndarray
    kind: str
    row_scales: np.ndarray

    def __post_init__(self) -> None:
        m, k = self.entries.shape
        if not 0 < m < k:
            raise ValueError(f"need 0 < M < K, got M={m}, K={k}")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("constraint entries must be finite")

    @property
    def n_rows(self) -> int:
        return self.entries.shape[0]

    @property
    def n_subcarriers(self) -> int:
        return self.entries.shape[1]


def subcarrier_kernel(
    num: Numerology, alloc: SubcarrierAllocation, freqs: np.ndarray
) -> np.ndarray:
    """Per-symbol continuous spectrum a_k(f) of each active subcarrier.

    For a rectangular symbol occupying t in [-T_cp, T] and carrying
    exp(j 2 pi k df t), the spectrum at frequency f is

        a_k(f) = T_o sinc(T_o (k df - f)) exp(j pi (k df - f) (T - T_cp))

    with T_o = T + T_cp and sinc(x) = sin(pi x)/(pi x).

    Returns an array of shape (len(freqs), K).
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    t_useful = num.useful_duration
    t_cp = num.cp_duration
    t_o = num.symbol_duration
    nu = alloc.as_array() * num.subcarrier_spacing - freqs[:, None]
    return t_o * np.sinc(t_o * nu) * np.exp(1j * np.pi * nu * (t_useful - t_cp))


def continuity_constraints(
    num: Numerology, alloc: SubcarrierAllocation, order: int
) -> ConstraintMatrix:
    """Edge-derivative constraints of derivative orders 0..order.

    For each order n there are two rows over the active indices k: a
    start-edge row with entries kn^n * exp(-j 2 pi k T_cp / T) and an
    end-edge row with entries kn^n, where kn = k / (K/2) keeps high powers
    of the index well conditioned. A vector in the nullspace modulates to a
    symbol whose first `order` time-derivatives vanish at both edges of the
    CP-extended interval, so any two consecutive precoded symbols join
    N-continuously.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    alloc.validate_for(num)
    k = alloc.as_array().astype(float)
    n_rows = 2 * (order + 1)
    if n_rows >= num.subcarrier_count:
        raise ValueError(
            f"2(order+1) = {n_rows} rows need K > {n_rows} subcarriers"
        )
    k_norm = k / (num.subcarrier_count / 2)
    # Phase of each subcarrier at the start edge t = -T_cp; at the end edge
    # t = T every subcarrier has phase exp(j 2 pi k) = 1.
    start_phase = np.exp(-2j * np.pi * k * num.cp_duration / num.useful_duration)
    rows = []
    for n in range(order + 1):
        weight = k_norm**n
        rows.append(weight * start_phase)
        rows.append(weight.astype(complex))
    entries, scales = _normalize_rows(np.asarray(rows))
    return ConstraintMatrix(entries, f"continuity(order={order})", scales)


def notch_constraints(
    num: Numerology, alloc: SubcarrierAllocation, notch_freqs
) -> ConstraintMatrix:
    """One constraint row per notch frequency, using the exact per-symbol
    spectrum kernel; precoded vectors have zero spectrum at each frequency.

    Exactly duplicated frequencies are dropped with a warning; near-dependent
    rows are handled at projector build.
    """
    freqs = np.atleast_1d(np.asarray(notch_freqs, dtype=float))
    if freqs.size == 0:
        raise ValueError("need at least one notch frequency")
    alloc.validate_for(num)
    if freqs.size >= num.subcarrier_count:
        raise ValueError("more notch frequencies than subcarriers")
    uniq, first = np.unique(freqs, return_index=True)
    if uniq.size < freqs.size:
        warnings.warn(
            "duplicate notch frequencies dropped", stacklevel=2
        )
        freqs = freqs[np.sort(first)]
    entries, scales = _normalize_rows(subcarrier_kernel(num, alloc, freqs))
    desc = ",".join(f"{f:g}" for f in freqs)
    return ConstraintMatrix(entries, f"notch[{desc}]", scales)


def stack(parts: list[ConstraintMatrix]) -> ConstraintMatrix:
    """Vertically concatenate constraint matrices sharing the same K."""
    if not parts:
        raise ValueError("stack needs at least one part")
    if len(parts) == 1:
        return parts[0]
    k = parts[0].n_subcarriers
    for p in parts:
        if p.n_subcarriers != k:
            raise ValueError(
                f"cannot stack constraints over K={p.n_subcarriers} with K={k}"
            )
    entries = np.vstack([p.entries for p in parts])
    scales = np.concatenate([p.row_scales for p in parts])
    kind = "stack(" + ";".join(p.kind for p in parts) + ")"
    return ConstraintMatrix(entries, kind, scales)


@dataclass(frozen=True)
class Projector:
    """Factored orthogonal projection G = I - T A onto nullspace(A).

    Only the independent constraint rows (after rank screening) are kept:
    `a_eff` is M_eff x K and `t_matrix` is K x M_eff with
    t_matrix = a_eff^H (a_eff a_eff^H)^-1, so G x = x - t_matrix (a_eff x).
    """

    constraint: ConstraintMatrix
    a_eff: np.ndarray
    t_matrix: np.ndarray
    dropped_rows: tuple[int, ...] = ()
    warnings_log: tuple[str, ...] = ()

    @property
    def n_subcarriers(self) -> int:
        return self.a_eff.shape[1]

    @property
    def n_constraints(self) -> int:
        """Nominal number of constraint rows, as built."""
        return self.constraint.n_rows

    @property
    def rank(self) -> int:
        """Effective number of independent constraints M_eff."""
        return self.a_eff.shape[0]

    @property
    def subspace_dim(self) -> int:
        return self.n_subcarriers - self.rank

    @cached_property
    def dense(self) -> np.ndarray:
        """Materialized K x K projection matrix (small K only)."""
        k = self.n_subcarriers
        if k > DENSE_G_MAX_K:
            raise ValueError(
                f"dense G capped at K <= {DENSE_G_MAX_K}, got K={k}"
            )
        return np.eye(k, dtype=complex) - self.t_matrix @ self.a_eff

    @cached_property
    def removed_basis(self) -> np.ndarray:
        """Orthonormal basis U (K x M_eff) of the removed subspace, the
        constraint rowspace: I - G = U U^H."""
        u, _, _ = np.linalg.svd(self.a_eff.conj().T, full_matrices=False)
        return u

    def __repr__(self) -> str:  # keep the (large) arrays out of reprs
        return (
            f"Projector(kind={self.constraint.kind!r}, K={self.n_subcarriers}, "
            f"M={self.n_constraints}, rank={self.rank})"
        )


def build_projector(a: ConstraintMatrix) -> Projector:
    """Derive the projection from a constraint matrix.

    T is computed through an SVD of the independent rows, never by an
    explicit inverse of A A^H. Rows whose singular contribution falls below
    RANK_TOL times the largest singular value are dropped (recorded in the
    projector metadata) so G stays an exact projector.
    """
    entries = a.entries
    m, k = entries.shape
    sv = np.linalg.svd(entries, compute_uv=False)
    rank = int(np.sum(sv > RANK_TOL * sv[0]))
    if rank == 0:
        raise ValueError("constraint matrix has effective rank 0")

    dropped: tuple[int, ...] = ()
    logs: tuple[str, ...] = ()
    if rank < m:
        # Pivoted QR on A^H picks a well-conditioned independent row subset.
        _, _, piv = scipy.linalg.qr(
            entries.conj().T, mode="economic", pivoting=True
        )
        keep = np.sort(piv[:rank])
        dropped = tuple(int(i) for i in np.sort(piv[rank:]))
        entries = entries[keep]
        logs = (
            f"dropped {m - rank} linearly dependent constraint rows "
            f"(indices {list(dropped)}); effective M = {rank}",
        )
        warnings.warn(logs[0], stacklevel=2)

    # SVD of A_eff^H = U S V^H gives T = U S^-1 V^H and T A = U U^H.
    u, s, vh = np.linalg.svd(entries.conj().T, full_matrices=False)
    t_matrix = (u / s) @ vh
    return Projector(a, entries, t_matrix, dropped, logs)


@dataclass
class OpCounter:
    """Accumulates the complex-multiplication count of fast-path applies."""

    complex_mults: int = 0


def precode(p: Projector, d: np.ndarray, ops: OpCounter | None = None) -> np.ndarray:
    """Apply G to one vector (length K) or a batch (..., K) of vectors.

    Uses the factored form d - T (A d): 2 * M_eff * K complex
    multiplications per vector, never materializing G.
    """
    d = np.asarray(d)
    if d.shape[-1] != p.n_subcarriers:
        raise ValueError(
            f"vector length {d.shape[-1]} does not match K={p.n_subcarriers}"
        )
    ad = d @ p.a_eff.T
    out = d - ad @ p.t_matrix.T
    if ops is not None:
        n_vec = int(np.prod(d.shape[:-1])) if d.ndim > 1 else 1
        ops.complex_mults += n_vec * 2 * p.rank * p.n_subcarriers
    return out


@dataclass(frozen=True)
class DistortionReport:
    """Projection distortion over a batch: eps = G d - d per vector."""

    epsilon_norms: np.ndarray
    evm_rms: float


def distortion(p: Projector, batch: np.ndarray) -> DistortionReport:
    """Distortion norms and batch RMS EVM (power-weighted ||eps||/||d||)."""
    batch = np.atleast_2d(np.asarray(batch))
    if batch.size == 0:
        raise ValueError("batch must be nonempty")
    eps = precode(p, batch) - batch
    eps_norms = np.linalg.norm(eps, axis=-1)
    ref = np.linalg.norm(batch, axis=-1)
    evm = float(np.sqrt(np.sum(eps_norms**2) / np.sum(ref**2)))
    return DistortionReport(eps_norms, evm)


def rate_loss(p: Projector) -> float:
    """Fraction of signal-space dimensions removed by the precoder."""
    return p.rank / p.n_subcarriers

"""Receiver-side operations: single-tap ZF equalization, matched-filter
projection, iterative symbol estimation and MISO maximum-ratio precoding.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..precoding import Projector, precode
from .mapping import Constellation, get_constellation, hard_decision, soft_symbols

__all__ = [
    "zf_equalize",
    "project_receive",
    "weighted_project",
    "iterative_detect",
    "mrt_precode",
]

# |H| below this is treated as an erased bin: equalized value 0, infinite
# noise scale, zero LLR downstream.
_ERASURE_EPS = 1e-12


def zf_equalize(
    grid: np.ndarray, h_eff: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-subcarrier zero forcing: divide by H, return noise scaling 1/|H|^2.

    `h_eff` broadcasts over leading grid axes (one response per subcarrier).
    """
    grid = np.asarray(grid)
    h_eff = np.asarray(h_eff)
    mag2 = np.abs(h_eff) ** 2
    erased = mag2 < _ERASURE_EPS
    safe = np.where(erased, 1.0, h_eff)
    eq = np.where(erased, 0.0, grid / safe)
    noise_scale = np.where(erased, np.inf, 1.0 / np.where(erased, 1.0, mag2))
    return eq, noise_scale


def project_receive(p: Projector, r: np.ndarray) -> np.ndarray:
    """Matched filter by the precoder itself: G r via the factored path.

    Removes the received noise component outside the precoded subspace.
    """
    return precode(p, r)


def weighted_project(
    p: Projector, r: np.ndarray, noise_var: np.ndarray
) -> np.ndarray:
    """Noise-weighted projection onto the precoded subspace.

    With per-bin noise covariance S = diag(noise_var) after equalization,
    the minimum-variance estimate of a subspace vector is the oblique
    projection r - S A^H (A S A^H)^-1 A r. It preserves the subspace, never
    amplifies any bin, and for white noise reduces exactly to G r. This is
    the right matched filter in fading: deep-faded bins get little weight
    instead of spreading their blown-up ZF noise over the whole vector.
    """
    r = np.asarray(r)
    var = np.broadcast_to(np.asarray(noise_var, dtype=float), (r.shape[-1],)).copy()
    finite = np.isfinite(var)
    if not np.any(finite):
        return r.copy()
    scale = np.median(var[finite])
    if scale <= 0 or np.all(var[finite] == var[finite][0]) and np.all(finite):
        return precode(p, r)  # white noise: plain matched filter
    var = np.where(finite, var, 1e9 * scale)
    var = np.maximum(var, 1e-9 * scale)
    a = p.a_eff  # (M, K)
    gram = (a * var[None, :]) @ a.conj().T  # A S A^H, (M, M)
    ar = r @ a.T  # (..., M)
    z = np.linalg.solve(gram, ar[..., None])[..., 0]
    return r - z @ (a.conj() * var[None, :])


def iterative_detect(
    p: Projector,
    r_eq: np.ndarray,
    noise_var,
    constellation: Constellation | str,
    max_iters: int = 10,
    mode: str = "soft",
    tol: float = 1e-6,
    psi: Callable[[np.ndarray], np.ndarray] | None = None,
    weighted: bool = False,
) -> tuple[np.ndarray, int]:
    """Fixed-point symbol estimation exploiting constellation discreteness.

    Iterates d^(i+1) = G r + (I - G) Psi(d^(i)) starting from the matched
    filter output G r, where Psi is the per-bin hard decision ("hard") or
    the posterior-mean soft symbol ("soft", using per-bin noise variances).
    (I - G) x is evaluated as T (A x). Stops when the update falls below
    `tol` relative or after `max_iters` whole-batch passes.

    With `weighted`, per-bin noise variances shape both halves of the
    update: the anchor becomes the noise-weighted projection of r, and the
    removed component U c is re-estimated by reliability-weighted least
    squares over the decisions instead of the uniform projection (I - G).
    For white noise this reduces exactly to the plain iteration; in fading
    it stops deep-faded bins from polluting the reconstruction.

    Returns (estimates, iterations_used). A custom `psi` overrides the
    constellation decision (e.g. for detecting in a spread pulse domain).
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    c = (
        get_constellation(constellation)
        if isinstance(constellation, str)
        else constellation
    )
    if psi is None:
        if mode == "hard":
            psi = lambda x: hard_decision(x, c)
        elif mode == "soft":
            psi = lambda x: soft_symbols(x, noise_var, c)
        else:
            raise ValueError(f"mode must be 'soft' or 'hard', got {mode!r}")

    reconstruct = None
    if weighted:
        anchor = weighted_project(p, r_eq, noise_var)
        var = np.broadcast_to(
            np.asarray(noise_var, dtype=float), (r_eq.shape[-1],)
        )
        finite = np.isfinite(var)
        scale = np.median(var[finite]) if np.any(finite) else 0.0
        if scale > 0 and not (np.all(finite) and np.all(var == var[0])):
            w = 1.0 / np.maximum(np.where(finite, var, np.inf), 1e-9 * scale)
            u = p.removed_basis
            uw = u.conj().T * w[None, :]  # (M, K)
            gram = uw @ u
            def reconstruct(x):
                rhs = (x - anchor) @ uw.T
                coef = np.linalg.solve(gram, rhs[..., None])[..., 0]
                return anchor + coef @ u.T
    else:
        anchor = precode(p, r_eq)  # G r, fixed across iterations
    if reconstruct is None:
        # (I - G) x = T (A x): reuse the fast path as x - G x.
        reconstruct = lambda x: anchor + (x - precode(p, x))

    d_hat = anchor
    iters = 0
    for _ in range(max_iters):
        iters += 1
        d_next = reconstruct(psi(d_hat))
        delta = np.linalg.norm(d_next - d_hat)
        scale_n = np.linalg.norm(d_hat)
        d_hat = d_next
        if delta <= tol * max(scale_n, 1e-300):
            break
    return d_hat, iters


def mrt_precode(h: np.ndarray) -> np.ndarray:
    """Maximum-ratio transmission weights for 1-stream MISO rows.

    `h` has shape (..., n_tx); returns w of the same shape with
    w = conj(h) / ||h||, so the effective scalar channel h w^T... is ||h||
    (real, nonnegative) and each subcarrier meets the unit power constraint.
    """
    h = np.asarray(h)
    norm = np.linalg.norm(h, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("zero channel row has no MRT direction")
    return h.conj() / norm

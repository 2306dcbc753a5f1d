"""Counter-based Gaussian draws keyed by (seed, path, step).

Every draw is a pure function of its coordinates, so path ``l`` receives the
same normals whatever the total path count or the order paths are processed
in. The core is the Philox-4x32-10 bijection, vectorised over numpy arrays.
"""

from __future__ import annotations

import numpy as np

__all__ = ["philox4x32", "uniforms", "standard_normals"]

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)


def philox4x32(counter, key, rounds: int = 10) -> np.ndarray:
    """Apply Philox-4x32 to a batch of counters.

    Parameters
    ----------
    counter : array_like, shape (..., 4)
        32-bit counter words.
    key : array_like, shape (..., 2)
        32-bit key words, broadcast against ``counter``.

    Returns
    -------
    ndarray of uint32, shape (..., 4)
    """
    ctr = np.asarray(counter, dtype=np.uint64) & _MASK32
    k = np.asarray(key, dtype=np.uint64) & _MASK32
    c0, c1, c2, c3 = (ctr[..., i] for i in range(4))
    k0, k1 = k[..., 0], k[..., 1]
    for _ in range(rounds):
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (
            ((p1 >> _SHIFT32) ^ c1 ^ k0) & _MASK32,
            p1 & _MASK32,
            ((p0 >> _SHIFT32) ^ c3 ^ k1) & _MASK32,
            p0 & _MASK32,
        )
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return np.stack([c0, c1, c2, c3], axis=-1).astype(np.uint32)


def _counter_block(seed: int, paths, step: int, stream: int) -> np.ndarray:
    paths = np.asarray(paths, dtype=np.uint64)
    if seed < 0 or step < 0 or stream < 0:
        raise ValueError("seed, step and stream must be non-negative")
    key = np.array([seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF], dtype=np.uint64)
    ctr = np.empty(paths.shape + (4,), dtype=np.uint64)
    ctr[..., 0] = paths & _MASK32
    ctr[..., 1] = paths >> _SHIFT32
    ctr[..., 2] = np.uint64(step)
    ctr[..., 3] = np.uint64(stream)
    return philox4x32(ctr, key)


def _to_unit(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    # 53-bit mantissa, mapped into the open interval (0, 1)
    bits = (hi.astype(np.uint64) << np.uint64(21)) | (lo.astype(np.uint64) >> np.uint64(11))
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


def uniforms(seed: int, paths, step: int, stream: int = 0) -> np.ndarray:
    """Two open-interval uniforms per path, shape ``paths.shape + (2,)``."""
    words = _counter_block(seed, paths, step, stream)
    u1 = _to_unit(words[..., 0], words[..., 1])
    u2 = _to_unit(words[..., 2], words[..., 3])
    return np.stack([u1, u2], axis=-1)


def standard_normals(seed: int, paths, step: int, stream: int = 0) -> np.ndarray:
    """One standard normal per path for the given step (Box-Muller, cosine branch)."""
    u = uniforms(seed, paths, step, stream)
    return np.sqrt(-2.0 * np.log(u[..., 0])) * np.cos(2.0 * np.pi * u[..., 1])

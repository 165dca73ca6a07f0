"""Sliding-window co-occurrence counting kernels.

The one hot loop of the feature stage: for every window of a token-id
sequence, count which ids are present and which unordered id pairs share
the window. Two implementations with identical integer outputs — a
compiled one and a vectorized fallback — selected by the PATHLAB_KERNELS
environment variable (numba | numpy | auto).
"""

from __future__ import annotations

import os

import numpy as np

KERNEL_ENV = "PATHLAB_KERNELS"

_CHUNK_ROWS = 4096


def _numba_usable() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def active_kernel() -> str:
    choice = os.environ.get(KERNEL_ENV, "auto").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not _numba_usable():
            raise RuntimeError("PATHLAB_KERNELS=numba but numba is not importable")
        return "numba"
    if choice not in ("", "auto"):
        raise RuntimeError(f"unknown {KERNEL_ENV} value: {choice!r}")
    return "numba" if _numba_usable() else "numpy"


def window_counts(ids: np.ndarray, window: int, vocab_size: int):
    """Presence counts over all length-``window`` windows of one sequence.

    Returns (token_counts[vocab_size], pair_codes, pair_counts, n_windows):
    token_counts[v] = windows containing id v at least once; pair codes are
    i*vocab_size+j for i<j, one count per window both appear in. Sequences
    shorter than the window yield a single whole-sequence window.
    """
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    if ids.size == 0:
        return (
            np.zeros(vocab_size, np.int64),
            np.empty(0, np.int64),
            np.empty(0, np.int64),
            0,
        )
    if active_kernel() == "numba":
        tok, codes, n_windows = _counts_numba(ids, window, vocab_size)
    else:
        tok, codes, n_windows = _counts_numpy(ids, window, vocab_size)
    pair_codes, pair_counts = np.unique(codes, return_counts=True)
    return tok, pair_codes, pair_counts, n_windows


def _counts_numpy(ids: np.ndarray, window: int, vocab_size: int):
    length = ids.shape[0]
    if length <= window:
        wins = ids[None, :]
    else:
        wins = np.lib.stride_tricks.sliding_window_view(ids, window)
    n_windows = wins.shape[0]
    width = wins.shape[1]

    tok = np.zeros(vocab_size, np.int64)
    upper_i, upper_j = np.triu_indices(width, k=1)
    code_chunks: list[np.ndarray] = []

    for start in range(0, n_windows, _CHUNK_ROWS):
        rows = np.sort(wins[start : start + _CHUNK_ROWS], axis=1)
        first = np.ones(rows.shape, dtype=bool)
        first[:, 1:] = rows[:, 1:] != rows[:, :-1]
        np.add.at(tok, rows[first], 1)
        if width > 1:
            a = rows[:, upper_i]
            b = rows[:, upper_j]
            valid = first[:, upper_i] & first[:, upper_j] & (a != b)
            code_chunks.append(a[valid] * vocab_size + b[valid])

    codes = (
        np.concatenate(code_chunks) if code_chunks else np.empty(0, np.int64)
    )
    return tok, codes, n_windows


_numba_impl = None


def _counts_numba(ids: np.ndarray, window: int, vocab_size: int):
    global _numba_impl
    if _numba_impl is None:
        from numba import njit

        @njit(cache=True)
        def impl(ids, window, vocab_size):  # pragma: no cover - compiled
            length = ids.shape[0]
            eff = window if length >= window else length
            n_windows = length - eff + 1
            tok = np.zeros(vocab_size, np.int64)
            stamp = np.full(vocab_size, -1, np.int64)
            buf = np.empty(eff, np.int64)
            cap = 1024
            codes = np.empty(cap, np.int64)
            m = 0
            for s in range(n_windows):
                k = 0
                for t in range(s, s + eff):
                    v = ids[t]
                    if stamp[v] != s:
                        stamp[v] = s
                        buf[k] = v
                        k += 1
                for a in range(k):
                    tok[buf[a]] += 1
                # canonical i<j codes need the distinct ids in order
                for a in range(1, k):
                    key = buf[a]
                    b = a - 1
                    while b >= 0 and buf[b] > key:
                        buf[b + 1] = buf[b]
                        b -= 1
                    buf[b + 1] = key
                needed = m + k * (k - 1) // 2
                while needed > cap:
                    cap *= 2
                if cap > codes.shape[0]:
                    grown = np.empty(cap, np.int64)
                    grown[:m] = codes[:m]
                    codes = grown
                for a in range(k):
                    for b in range(a + 1, k):
                        codes[m] = buf[a] * vocab_size + buf[b]
                        m += 1
            return tok, codes[:m].copy(), n_windows

        _numba_impl = impl
    return _numba_impl(ids, window, vocab_size)

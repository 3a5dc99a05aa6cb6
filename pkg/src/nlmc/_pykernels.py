"""NumPy implementations of the inner loops in ``_ckernels.pyx``.

Results agree with the compiled versions to rounding; both accumulate each
target's sum independently so chunking never changes a value.
"""
import numpy as np


def flux_sum_batched(P, X, NW, expo):
    d = X - P[:, None, :]
    r2 = np.einsum("bkd,bkd->bk", d, d)
    dot = np.einsum("bkd,bkd->bk", d, NW)
    return np.sum(dot / r2 ** (0.5 * expo), axis=1)


def flux_sum_shared(P, X, NW, expo):
    out = np.empty(P.shape[0])
    for b in range(P.shape[0]):
        d = X - P[b]
        r2 = np.einsum("kd,kd->k", d, d)
        dot = np.einsum("kd,kd->k", d, NW)
        out[b] = np.sum(dot / r2 ** (0.5 * expo))
    return out


def lipschitz_sup(P, H, hmin, block=512):
    P = np.asarray(P, dtype=float)
    H = np.asarray(H, dtype=float)
    M = P.shape[0]
    best, bi, bj = -1.0, -1, -1
    idx = np.arange(M)
    for start in range(0, M, block):
        rows = slice(start, min(start + block, M))
        d = P[rows, None, :] - P[None, :, :]
        r = np.sqrt(np.einsum("ijd,ijd->ij", d, d))
        q = np.abs(H[rows, None] - H[None, :]) / np.where(r > 0, r, np.inf)
        # upper triangle only, matching the compiled loop order
        mask = (r >= hmin) & (idx[None, :] > idx[rows, None])
        q = np.where(mask, q, -1.0)
        k = int(np.argmax(q))
        i, j = divmod(k, M)
        if q[i, j] > best:
            best, bi, bj = float(q[i, j]), start + i, j
    return best, bi, bj


def rotate_nodes(R, L):
    B, n = R.shape[0], L.shape[1]
    out = np.zeros((B, L.shape[0], n))
    for i in range(n):
        acc = out[:, :, i]
        for j in range(n):
            acc += R[:, None, i, j] * L[None, :, j]
    out /= np.sqrt(np.sum(out * out, axis=-1))[..., None]
    return out

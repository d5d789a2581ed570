"""Brute-force reference implementations used to cross-check the fast paths.

Everything here favors obviousness over speed: plain nested loops, no
vectorization, no shared code with the package under test.
"""

from __future__ import annotations

import math

import numpy as np


def conv2d_naive(x: np.ndarray, w: np.ndarray, b: np.ndarray | None,
                 stride: int, pad: int) -> np.ndarray:
    B, Cin, H, W = x.shape
    Cout, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    Ho = (H + 2 * pad - kh) // stride + 1
    Wo = (W + 2 * pad - kw) // stride + 1
    out = np.zeros((B, Cout, Ho, Wo))
    for n in range(B):
        for co in range(Cout):
            for i in range(Ho):
                for j in range(Wo):
                    acc = 0.0
                    for ci in range(Cin):
                        for u in range(kh):
                            for v in range(kw):
                                acc += xp[n, ci, i * stride + u, j * stride + v] * w[co, ci, u, v]
                    out[n, co, i, j] = acc + (b[co] if b is not None else 0.0)
    return out


def pool_bins(length: int, out: int) -> list[tuple[int, int]]:
    return [(math.floor(i * length / out), math.floor((i + 1) * length / out))
            for i in range(out)]


def adaptive_avg_pool_naive(x: np.ndarray, oh: int, ow: int) -> np.ndarray:
    B, C, H, W = x.shape
    rows = pool_bins(H, oh)
    cols = pool_bins(W, ow)
    out = np.zeros((B, C, oh, ow))
    for n in range(B):
        for c in range(C):
            for i, (r0, r1) in enumerate(rows):
                for j, (c0, c1) in enumerate(cols):
                    vals = [x[n, c, r, s] for r in range(r0, r1) for s in range(c0, c1)]
                    out[n, c, i, j] = sum(vals) / len(vals)
    return out


def roi_avg_pool_naive(x: np.ndarray, top: int, bottom: int, left: int, right: int,
                       oh: int, ow: int) -> np.ndarray:
    return adaptive_avg_pool_naive(x[:, :, top:bottom, left:right], oh, ow)


def cross_entropy_naive(logits: np.ndarray, labels: np.ndarray) -> float:
    B, K = logits.shape
    total = 0.0
    for n in range(B):
        exps = [math.exp(v) for v in logits[n]]
        z = sum(exps)
        total += -math.log(exps[labels[n]] / z)
    return total / B


def numeric_grad(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar function of one array, entry by entry."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        fp = f(x)
        flat[k] = orig - eps
        fm = f(x)
        flat[k] = orig
        gf[k] = (fp - fm) / (2 * eps)
    return g


def kmeans2_best_split(scores: list[int]) -> tuple[float, set[int]]:
    """Optimal 2-cluster 1-D k-means by exhaustive threshold search.

    Returns (best SSE, set of score values assigned to the upper cluster).
    Splits are only considered between distinct sorted values, which is
    sufficient: an optimal 1-D 2-means partition is always an interval split.
    """
    xs = sorted(scores)
    distinct = sorted(set(xs))
    if len(distinct) < 2:
        return 0.0, set()

    def sse(vals):
        if not vals:
            return 0.0
        m = sum(vals) / len(vals)
        return sum((v - m) ** 2 for v in vals)

    best = (math.inf, set())
    for t_idx in range(1, len(distinct)):
        thr = distinct[t_idx]
        lower = [v for v in xs if v < thr]
        upper = [v for v in xs if v >= thr]
        total = sse(lower) + sse(upper)
        if total < best[0] - 1e-12:
            best = (total, set(v for v in distinct if v >= thr))
    return best


def detect_motif(rgb: np.ndarray) -> str:
    """Classify a synthetic image by strip orientation profiles.

    Strips span the full image extent, so a strip row/column is almost
    entirely made of the brightest pixels; clutter rectangles never cover
    more than a small fraction of any line.
    """
    gray = rgb.astype(np.float64).mean(axis=2)
    med = float(np.median(gray))
    mx = float(gray.max())
    if mx - med < 30.0:
        return "none"
    bright = gray > med + 0.6 * (mx - med)
    has_h = bool((bright.mean(axis=1) > 0.85).any())
    has_v = bool((bright.mean(axis=0) > 0.85).any())
    if has_h and has_v:
        return "crossing"
    if has_h:
        return "hstrip"
    if has_v:
        return "vstrip"
    return "none"


def detect_label(rgb: np.ndarray) -> int:
    """1 (dangerous) iff both strip orientations are present."""
    return 1 if detect_motif(rgb) == "crossing" else 0


def cov_within_naive(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Ordered-pair double sum of outer products of within-class differences.

    O(n^2 d^2); classes with fewer than 2 samples contribute nothing because
    the i != j sum is empty.
    """
    d = (xs if len(xs) else ys).shape[1]
    out = np.zeros((d, d))
    for a in (xs, ys):
        for i in range(len(a)):
            for j in range(len(a)):
                if i != j:
                    diff = a[i] - a[j]
                    out += np.outer(diff, diff)
    return out


def cov_between_naive(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """All-pairs sum of outer products of cross-class differences."""
    d = (xs if len(xs) else ys).shape[1]
    out = np.zeros((d, d))
    for x in xs:
        for y in ys:
            diff = x - y
            out += np.outer(diff, diff)
    return out


def coral_cov_naive(feats: np.ndarray) -> np.ndarray:
    """Centered feature covariance with the n-1 denominator."""
    centered = feats - feats.mean(axis=0)
    return centered.T @ centered / (len(feats) - 1)

"""Independent reference implementations used as test oracles.

Each one takes a deliberately different route from the library code (sampling
instead of closed forms, explicit loops instead of vectorized numpy) so an
agreement is evidence rather than a tautology.
"""

from __future__ import annotations

import math

import numpy as np


def mc_iou(a, b, n: int = 200_000, seed: int = 0) -> float:
    """Spherical IoU by counting area-uniform samples inside each box.

    Samples are uniform in (theta, sin phi), which is uniform in surface
    area, restricted to the latitude band spanned by the two boxes and to a
    longitude window around ``a`` wide enough to hold both of them.
    """
    rng = np.random.default_rng(seed)
    lo = min(a.phi_bottom, b.phi_bottom)
    hi = max(a.phi_top, b.phi_top)
    gap = abs(math.remainder(b.theta - a.theta, 2 * math.pi))
    half = min(math.pi, gap + 0.5 * (a.w_theta + b.w_theta))
    theta = a.theta + rng.uniform(-half, half, n)
    phi = np.arcsin(rng.uniform(math.sin(lo), math.sin(hi), n))

    def inside(box):
        d = np.angle(np.exp(1j * (theta - box.theta)))  # wrapped difference
        return (np.abs(d) <= 0.5 * box.w_theta) & (phi >= box.phi_bottom) & (phi <= box.phi_top)

    ia, ib = inside(a), inside(b)
    union = np.count_nonzero(ia | ib)
    return np.count_nonzero(ia & ib) / union if union else 0.0


def brute_nfov_extents(corners, persp_theta: float, persp_phi: float, n: int = 20001):
    """Angular span of a calibrated NFoV box from dense sampling of its outline.

    Builds the rotation from its factors (pitch then yaw) rather than the
    printed matrix, and measures theta relative to the box centre.
    """
    (x0, y0), (x1, y1) = corners
    ct, st = math.cos(persp_theta), math.sin(persp_theta)
    cp, sp = math.cos(persp_phi), math.sin(persp_phi)
    yaw = np.array([[ct, -st, 0], [st, ct, 0], [0, 0, 1]])
    pitch = np.array([[cp, 0, -sp], [0, 1, 0], [sp, 0, cp]])
    m = yaw @ pitch
    s = np.linspace(0, 1, n)
    xs = np.concatenate([x0 + s * (x1 - x0), np.full(n, x1), x0 + s * (x1 - x0), np.full(n, x0)])
    ys = np.concatenate([np.full(n, y0), y0 + s * (y1 - y0), np.full(n, y1), y0 + s * (y1 - y0)])
    v = m @ np.stack([np.ones_like(xs), xs, ys])
    v /= np.linalg.norm(v, axis=0)
    c = m @ np.array([1.0, 0.5 * (x0 + x1), 0.5 * (y0 + y1)])
    tc = math.atan2(c[1], c[0])
    th = np.angle(np.exp(1j * (np.arctan2(v[1], v[0]) - tc)))
    ph = np.arcsin(np.clip(v[2], -1, 1))
    return th.max() - th.min(), ph.max() - ph.min()


def loop_mfcc(x: np.ndarray, sr: float, n_coeffs=13, n_bands=40, frame_s=0.025, hop_s=0.010):
    """Textbook MFCC with explicit loops: Hamming frames, |FFT|^2 / N, HTK mel
    triangles, natural log floored at 1e-10, orthonormal DCT-II."""
    flen = int(round(frame_s * sr))
    hop = int(round(hop_s * sr))
    nfft = 1
    while nfft < flen:
        nfft *= 2
    win = [0.54 - 0.46 * math.cos(2 * math.pi * i / (flen - 1)) for i in range(flen)]
    mel = lambda f: 2595.0 * math.log10(1 + f / 700.0)
    imel = lambda m: 700.0 * (10 ** (m / 2595.0) - 1)
    top = mel(sr / 2)
    edges = [imel(top * i / (n_bands + 1)) for i in range(n_bands + 2)]
    out = []
    start = 0
    while start + flen <= len(x):
        frame = np.array([x[start + i] * win[i] for i in range(flen)])
        spec = np.fft.fft(frame, nfft)
        power = [abs(spec[k]) ** 2 / nfft for k in range(nfft // 2 + 1)]
        logs = []
        for b in range(n_bands):
            lo, mid, hi = edges[b], edges[b + 1], edges[b + 2]
            e = 0.0
            for k, p in enumerate(power):
                f = k * sr / nfft
                if lo < f < hi:
                    wgt = (f - lo) / (mid - lo) if f <= mid else (hi - f) / (hi - mid)
                    e += wgt * p
            logs.append(math.log(max(e, 1e-10)))
        row = []
        for q in range(n_coeffs):
            acc = sum(logs[b] * math.cos(math.pi * q * (2 * b + 1) / (2 * n_bands))
                      for b in range(n_bands))
            scale = math.sqrt(1.0 / n_bands) if q == 0 else math.sqrt(2.0 / n_bands)
            row.append(scale * acc)
        out.append(row)
        start += hop
    return np.array(out)


def scalar_adamw(x0: float, grad_fn, lrs, wd=0.01, b1=0.9, b2=0.999, eps=1e-8):
    """AdamW on a single float, written out step by step in plain Python."""
    x, m, v = x0, 0.0, 0.0
    for t, lr in enumerate(lrs, 1):
        g = grad_fn(x)
        x = x - lr * wd * x
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1 ** t)
        vh = v / (1 - b2 ** t)
        x = x - lr * mh / (math.sqrt(vh) + eps)
    return x


def two_point_skewness(a: float, b: float, na: int, nb: int) -> float:
    """Third standardized moment of ``na`` copies of a and ``nb`` copies of b."""
    p = na / (na + nb)
    q = 1 - p
    # Bernoulli law with success weight q at the larger value: (1 - 2q) / sqrt(pq)
    s = (p - q) / math.sqrt(p * q)
    return s if b > a else -s

"""Turn a long soundtrack into candidate clips and run the quality filters."""

import math

import numpy as np

from spherevqa import media_filters as mf

sr = 8000.0
t = np.arange(int(60 * sr)) / sr
x = 0.01 * np.random.default_rng(0).normal(size=t.size)
for start, amp in ((12.0, 0.9), (13.5, 0.4), (40.0, 0.7)):
    sl = slice(int(start * sr), int((start + 0.5) * sr))
    x[sl] += amp * np.sin(2 * math.pi * 330 * t[sl])
track = mf.AudioTrack(x, sr)

clips = mf.extract_peak_clips(track)
print("peak clips:", [(c.start, c.end) for c in clips])

# Mel coefficients per clip feed the duplicate-audio check.
mels = []
for c in clips:
    a, b = int(c.start * sr), int(c.end * sr)
    mels.append(mf.mel_coefficients(mf.AudioTrack(x[a:b], sr)))
print("mel shapes:", [m.shape for m in mels])
print("distance between clips:", round(mf.mel_distance(mels[0], mels[1]), 3))

# Frame filters: a natural-looking frame passes, a mostly black title card does not.
rng = np.random.default_rng(1)
photo = np.clip(rng.normal(128, 40, (64, 64, 3)), 0, 255).astype(np.uint8)
card = np.zeros((64, 64, 3), np.uint8)
card[30:34, 10:54] = 255
for name, px in (("photo", photo), ("title card", card)):
    f = mf.FrameImage(px)
    print(f"{name:>10}: skew={np.round(mf.histogram_skewness(f), 2)} synthetic={mf.is_synthetic_frame(f)}")

# Perceptual hashes barely move under a one-pixel change.
h1 = mf.dct_phash64(mf.FrameImage(photo))
bad = photo.copy()
bad[5, 5] = 255 - bad[5, 5]
print("hash distance after one pixel:", mf.hamming(h1, mf.dct_phash64(mf.FrameImage(bad))))

frames = [mf.FrameImage(np.roll(photo, 7 * k, axis=1)) for k in range(4)]
cands = [mf.ClipCandidate(c, m, frames if i else [frames[0]] * 4) for i, (c, m) in enumerate(zip(clips, mels))]
kept, rejected = mf.filter_clips(cands)
print("kept:", [k.interval.start for k in kept])
print("rejected:", rejected)

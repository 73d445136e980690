"""From frame-level class labels and stereo audio to spatially tagged events."""

import numpy as np

from spherevqa import audio_events as ae

# Top-3 labels per half-second frame; order inside a frame does not matter.
labels = ae.FrameLabels([("dog", "speech", "wind")] * 3 + [("wind", "dog", "speech")]
                        + [("car", "speech", "wind")] * 2, 0.5)
spans = ae.segment_events(labels)
for s in spans:
    print(f"{s.start:4.1f}s +{s.duration:.1f}s {sorted(s.labels)}")

sr = 1000.0
rng = np.random.default_rng(0)
tone = np.sin(np.arange(int(3 * sr)) * 0.2)
left = np.concatenate([tone[:2000], 0.3 * tone[2000:]])   # dog on the left, car on the right
right = np.concatenate([0.3 * tone[:2000], tone[2000:]])

b = ae.stereo_to_bformat(left, right)
print("first-order coefficients of sample 10:", np.round(ae.sh_coefficients(b)[10], 3))

feats = rng.normal(size=(len(labels.labels), 4))
events = ae.build_events(labels, feats, feats, left, right, sr)
for e in events:
    side = "left" if e.skewness > 0 else "right"
    print(f"{sorted(e.labels)} skewness={e.skewness:+.3f} ({side})")

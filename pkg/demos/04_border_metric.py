"""The empty-border metric over a small synthetic batch.

Constructs images with known border behavior and shows how the per-side
flags and the aggregate percentage respond.
"""

import numpy as np

from alfie import batch_report, empty_border_flags

rng = np.random.default_rng(0)
flags = []
labels = []

img = np.ones((32, 32, 3))
img[8:24, 8:24] = rng.uniform(-1, 1, size=(16, 16, 3))
flags.append(empty_border_flags(img))
labels.append("centered subject, clean borders")

img = np.ones((32, 32, 3))
img[:, :6] = -0.5  # subject bleeding off the left edge
flags.append(empty_border_flags(img))
labels.append("cropped at the left")

img = np.full((32, 32, 3), 0.85)  # uniformly light, above the 0.8 threshold
flags.append(empty_border_flags(img))
labels.append("uniform light gray")

img = np.full((32, 32, 3), 0.75)  # light but below threshold
flags.append(empty_border_flags(img))
labels.append("uniform darker gray")

for label, f in zip(labels, flags):
    sides = "".join(ch if ok else "-" for ch, ok in
                    zip("lrtb", (f.left, f.right, f.top, f.bottom)))
    print(f"{label:34s} sides[{sides}] all={f.all_sides}")

print()
print(batch_report(flags).render_text())
print()
print(batch_report(flags, clip_scores=[31.2, 29.9, 30.4, 30.1]).render_text())

"""Alpha-over compositing: drop a generated RGBA cutout onto backgrounds."""

import os
import subprocess
import sys
import tempfile

import numpy as np

from alfie import assemble_rgba, composite_over, read_png, write_png

work = tempfile.mkdtemp(prefix="alfie_composite_demo_")
fg_path = os.path.join(work, "subject.png")

print("generating a cutout on the toy backend...")
subprocess.run([sys.executable, "-m", "alfie.cli", "generate",
                "--prompt", "A green dragon", "--seed", "4", "--steps", "30",
                "--size", "64", "--border-px", "16", "--out", fg_path],
               check=True)
fg = read_png(fg_path)
print(f"cutout alpha coverage: {float((fg[:, :, 3] > 0).mean()):.0%}")

yy, xx = np.mgrid[:64, :64]
backgrounds = {
    "gradient": np.stack([xx / 63 * 2 - 1, yy / 63 * 2 - 1, np.full((64, 64), 0.2)], axis=2),
    "checker": np.where(((yy // 8 + xx // 8) % 2 == 0)[:, :, None], 0.8, -0.4) * np.ones(3),
}
for name, bg in backgrounds.items():
    out = composite_over(fg, bg)
    path = os.path.join(work, f"on_{name}.png")
    write_png(assemble_rgba(out, np.ones((64, 64))), path)
    print(f"composited onto {name}: {path}")

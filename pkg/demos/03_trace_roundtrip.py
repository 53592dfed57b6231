"""Attention traces as files: write one, read it back, extract alpha from it.

The trace directory format is the bridge to real model runtimes: anything
that writes the manifest plus raw float32 tensors can feed the engine. Here
the toy backend plays the exporter.
"""

import os
import subprocess
import sys
import tempfile

from alfie import GenerationRequest, ToyDitConfig, generate, init_model, read_trace, write_trace

work = tempfile.mkdtemp(prefix="alfie_trace_demo_")
trace_dir = os.path.join(work, "trace")

model = init_model(ToyDitConfig(seed=21))
req = GenerationRequest(prompt="A red fox", seed=21, steps=30, out_size=(64, 64),
                        border_px=16, keep_last_maps=10)
out = generate(model, req)
manifest = write_trace(out.trace, out.rgb, trace_dir)
files = sorted(os.listdir(trace_dir))
total = sum(os.path.getsize(os.path.join(trace_dir, f)) for f in files)
print(f"wrote {len(files)} files ({total / 1e6:.1f} MB) to {trace_dir}")
print("manifest head:")
with open(manifest) as f:
    for line in list(f)[:8]:
        print("   ", line.rstrip())

back, rgb = read_trace(trace_dir)
assert rgb.tobytes() == out.rgb.astype("<f4").tobytes()
print(f"round trip bit-exact: {len(back.records)} records, "
      f"tokens {back.token_strings}")

png_path = os.path.join(work, "from_trace.png")
cmd = [sys.executable, "-m", "alfie.cli", "extract-alpha",
       "--trace-dir", trace_dir, "--out", png_path, "--seed", "21"]
print("+", " ".join(cmd[3:]))
subprocess.run(cmd, check=True)
print(f"alpha extracted from the trace alone -> {png_path}")

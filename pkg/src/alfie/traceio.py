"""Bit-exact directory format for attention traces and decoded RGB.

A trace directory holds one human-readable ``manifest.txt`` plus one raw
tensor file per named tensor: little-endian float32, row-major (C order),
no header. Any runtime that can write those two things can feed the
engine, which is the point; no container library is involved.

Manifest lines are ``key = value``. Multi-value fields are space-separated;
tensor entries repeat as ``tensor = <name> float32 <dims 'x'-joined> <file>``.
Reading is fail-closed: a size mismatch, missing tensor, NaN payload, or
unknown version is an error naming the offender.
"""

from __future__ import annotations

import os

import numpy as np

from .attention import AttentionRecord, AttentionTrace

__all__ = ["TraceFormatError", "read_trace", "write_trace"]

FORMAT_VERSION = 1


class TraceFormatError(ValueError):
    """Raised when a trace directory violates the documented format."""


def _tensor_name(kind: str, t: int, layer: int, head: int) -> str:
    return f"{kind}_t{t:05d}_l{layer:02d}_h{head:02d}"


def _write_tensor(dir_path: str, name: str, values: np.ndarray) -> tuple[str, ...]:
    arr = np.ascontiguousarray(values, dtype="<f4")
    if not np.isfinite(arr).all():
        raise TraceFormatError(f"tensor {name!r} contains non-finite values")
    filename = name + ".f32"
    with open(os.path.join(dir_path, filename), "wb") as f:
        f.write(arr.tobytes())
    dims = "x".join(str(d) for d in arr.shape)
    return (name, "float32", dims, filename)


def write_trace(trace: AttentionTrace, rgb: np.ndarray, dir_path: str) -> str:
    """Write a trace directory; returns the manifest path."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"rgb must be (h, w, 3), got {rgb.shape}")
    for tok in trace.token_strings:
        if not tok or tok.split() != [tok]:
            raise TraceFormatError(f"token string {tok!r} cannot round-trip the manifest")

    os.makedirs(dir_path, exist_ok=True)
    entries = []
    if trace.preaveraged:
        if trace.cross_mean is None or trace.self_mean is None:
            raise TraceFormatError("preaveraged trace is missing its mean tensors")
        entries.append(_write_tensor(dir_path, "cross_mean", trace.cross_mean))
        entries.append(_write_tensor(dir_path, "self_mean", trace.self_mean))
    else:
        for t in trace.steps_recorded:
            for layer in range(trace.layers):
                for head in range(trace.heads):
                    rec = trace.records.get((t, layer, head))
                    if rec is None:
                        raise TraceFormatError(
                            f"trace is missing the record for (t={t}, l={layer}, h={head})"
                        )
                    entries.append(_write_tensor(
                        dir_path, _tensor_name("cross", t, layer, head), rec.cross))
                    entries.append(_write_tensor(
                        dir_path, _tensor_name("self", t, layer, head), rec.self_))
    entries.append(_write_tensor(dir_path, "rgb", rgb))

    gh, gw = trace.token_grid
    lines = [
        f"format_version = {FORMAT_VERSION}",
        f"prompt = {trace.prompt}",
        f"bg_prompt = {trace.bg_prompt}",
        f"token_strings = {' '.join(trace.token_strings)}",
        f"token_grid = {gh} {gw}",
        f"image_size = {rgb.shape[0]} {rgb.shape[1]}",
        f"steps_recorded = {' '.join(str(t) for t in trace.steps_recorded)}",
        f"layers = {trace.layers}",
        f"heads = {trace.heads}",
        f"sigma_schedule = {' '.join(repr(float(s)) for s in trace.sigma_schedule)}",
        f"preaveraged = {'true' if trace.preaveraged else 'false'}",
    ]
    lines += [f"tensor = {' '.join(entry)}" for entry in entries]
    manifest_path = os.path.join(dir_path, "manifest.txt")
    with open(manifest_path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    return manifest_path


def _parse_manifest(path: str) -> tuple[dict[str, str], list[tuple[str, ...]]]:
    fields: dict[str, str] = {}
    tensors: list[tuple[str, ...]] = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            key, sep, value = line.partition(" = ")
            if not sep:
                raise TraceFormatError(f"malformed manifest line: {line!r}")
            if key == "tensor":
                parts = tuple(value.split())
                if len(parts) != 4:
                    raise TraceFormatError(f"malformed tensor entry: {value!r}")
                tensors.append(parts)
            else:
                fields[key] = value
    return fields, tensors


def _load_tensor(dir_path: str, entry: tuple[str, ...]) -> np.ndarray:
    name, dtype, dims, filename = entry
    if dtype != "float32":
        raise TraceFormatError(f"tensor {name!r} has unsupported dtype {dtype!r}")
    try:
        shape = tuple(int(d) for d in dims.split("x"))
    except ValueError as exc:
        raise TraceFormatError(f"tensor {name!r} has malformed shape {dims!r}") from exc
    if not shape or any(d < 1 for d in shape):
        raise TraceFormatError(f"tensor {name!r} has malformed shape {dims!r}")
    path = os.path.join(dir_path, filename)
    if not os.path.exists(path):
        raise TraceFormatError(f"tensor {name!r} file missing: {filename}")
    expected = int(np.prod(shape)) * 4
    actual = os.path.getsize(path)
    if actual != expected:
        raise TraceFormatError(
            f"tensor {name!r}: declared shape {shape} needs {expected} bytes, "
            f"file has {actual}"
        )
    data = np.fromfile(path, dtype="<f4").reshape(shape)
    if not np.isfinite(data).all():
        raise TraceFormatError(f"tensor {name!r} contains NaN or infinite values")
    return data


def read_trace(dir_path: str) -> tuple[AttentionTrace, np.ndarray]:
    """Exact inverse of write_trace; returns (trace, rgb)."""
    manifest_path = os.path.join(dir_path, "manifest.txt")
    if not os.path.exists(manifest_path):
        raise TraceFormatError(f"no manifest.txt in {dir_path}")
    fields, tensor_entries = _parse_manifest(manifest_path)

    try:
        version = int(fields["format_version"])
    except (KeyError, ValueError) as exc:
        raise TraceFormatError("manifest is missing a valid format_version") from exc
    if version != FORMAT_VERSION:
        raise TraceFormatError(f"unsupported trace format version {version}")

    required = ("token_strings", "token_grid", "image_size", "steps_recorded",
                "layers", "heads", "sigma_schedule", "preaveraged")
    for key in required:
        if key not in fields:
            raise TraceFormatError(f"manifest is missing the {key!r} field")

    try:
        token_strings = fields["token_strings"].split()
        gh, gw = (int(v) for v in fields["token_grid"].split())
        img_h, img_w = (int(v) for v in fields["image_size"].split())
        steps = [int(v) for v in fields["steps_recorded"].split()]
        layers = int(fields["layers"])
        heads = int(fields["heads"])
        sigmas = np.array([float(v) for v in fields["sigma_schedule"].split()])
    except ValueError as exc:
        raise TraceFormatError(f"malformed manifest field: {exc}") from exc
    preaveraged = fields["preaveraged"] == "true"

    loaded = {entry[0]: _load_tensor(dir_path, entry) for entry in tensor_entries}
    if "rgb" not in loaded:
        raise TraceFormatError("manifest declares no rgb tensor")
    rgb = loaded["rgb"]
    if rgb.shape != (img_h, img_w, 3):
        raise TraceFormatError(
            f"rgb tensor shape {rgb.shape} disagrees with image_size {(img_h, img_w)}"
        )

    trace = AttentionTrace(
        token_strings=token_strings,
        token_grid=(gh, gw),
        sigma_schedule=sigmas,
        steps_recorded=steps,
        layers=layers,
        heads=heads,
        preaveraged=preaveraged,
        prompt=fields.get("prompt", ""),
        bg_prompt=fields.get("bg_prompt", ""),
    )

    n = len(token_strings)
    if preaveraged:
        for name, shape in (("cross_mean", (gh, gw, n)), ("self_mean", (gh * gw, gh, gw))):
            if name not in loaded:
                raise TraceFormatError(f"preaveraged trace is missing {name!r}")
            if loaded[name].shape != shape:
                raise TraceFormatError(
                    f"tensor {name!r} shape {loaded[name].shape} should be {shape}"
                )
        trace.cross_mean = loaded["cross_mean"]
        trace.self_mean = loaded["self_mean"]
    else:
        for t in steps:
            for layer in range(layers):
                for head in range(heads):
                    cname = _tensor_name("cross", t, layer, head)
                    sname = _tensor_name("self", t, layer, head)
                    if cname not in loaded or sname not in loaded:
                        raise TraceFormatError(
                            f"trace is missing tensors for (t={t}, l={layer}, h={head})"
                        )
                    cross = loaded[cname]
                    self_ = loaded[sname]
                    if cross.shape != (gh, gw, n):
                        raise TraceFormatError(
                            f"tensor {cname!r} shape {cross.shape} should be {(gh, gw, n)}"
                        )
                    if self_.shape != (gh * gw, gh, gw):
                        raise TraceFormatError(
                            f"tensor {sname!r} shape {self_.shape} should be "
                            f"{(gh * gw, gh, gw)}"
                        )
                    trace.records[(t, layer, head)] = AttentionRecord(
                        layer=layer, head=head, cross=cross, self_=self_)
    return trace, rgb

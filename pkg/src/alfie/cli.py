"""Command-line surface: generate / extract-alpha / eval / composite.

Option resolution order is flags > ALFIE_* environment variables > config
file (``key = value`` lines mirroring the flag names) > built-in defaults.
Exit codes: 0 success, 2 usage, 3 bad input data, 4 internal error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .attention import (
    adjust_opacity,
    aggregate,
    estimate_alpha,
    foreground_cross_map,
    fuse_self_attention,
)
from .evalmetrics import batch_report, empty_border_flags
from .generation import GenerationRequest, generate
from .grabcut import clean_alpha, grabcut_refine
from .imaging import (
    assemble_rgba,
    composite_over,
    read_png,
    write_png,
    write_png_gray,
    write_png_gray_bytes,
)
from .prompts import DEFAULT_EXCLUSION, load_exclusion_file, select_noun_spans
from .toymodel import ToyDitConfig, init_model
from .traceio import TraceFormatError, read_trace, write_trace
from .trimap import quantize_trimap, trimap_to_gray

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


class UsageError(Exception):
    pass


class InputDataError(Exception):
    pass


@dataclass(frozen=True)
class _Opt:
    name: str
    parse: Callable[[str], Any]
    default: Any
    help: str


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _choice(*allowed: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in allowed:
            raise ValueError(f"expected one of {allowed}, got {text!r}")
        return text
    return parse


def _parse_size(text: str) -> tuple[int, int]:
    dims = [int(p) for p in text.lower().replace("x", " ").split()]
    if len(dims) == 1:
        dims = [dims[0], dims[0]]
    if len(dims) != 2 or min(dims) < 1:
        raise ValueError(f"expected H or HxW, got {text!r}")
    return dims[0], dims[1]


_GENERATION_OPTS = [
    _Opt("prompt", str, None, "subject text prompt"),
    _Opt("bg_prompt", str, "a white background", "background branch prompt"),
    _Opt("seed", int, 0, "generation seed"),
    _Opt("steps", int, 30, "denoising steps"),
    _Opt("guidance", float, 4.5, "classifier-free guidance scale"),
    _Opt("border_px", int, 64, "center-mask border width in pixels"),
    _Opt("keep_last_maps", int, None, "steps whose attention is kept (default min(10, steps))"),
    _Opt("size", _parse_size, (64, 64), "output size, H or HxW"),
]

_ALPHA_OPTS = [
    _Opt("k", float, 0.5, "opacity adjustment (alpha -> min(1, (1+k) alpha))"),
    _Opt("nouns", str, None, "comma-separated subject-noun override"),
    _Opt("exclusion_file", str, None, "generic-noun exclusion list, one word per line"),
    _Opt("trimap_mode", _choice("quantile", "absolute"), "quantile",
         "trimap thresholds: quantile mode or absolute values"),
    _Opt("grabcut_iters", int, 5, "GrabCut refinement iterations"),
    _Opt("grabcut_k", int, 5, "GMM components per side"),
    _Opt("gamma", float, 50.0, "GrabCut smoothness weight"),
]

_SEED_OPT = [_Opt("seed", int, 0, "seed for the GrabCut color clustering")]

_EVAL_OPTS = [
    _Opt("margin", int, 4, "border strip width in pixels"),
    _Opt("threshold", float, 0.8, "per-channel emptiness threshold"),
    _Opt("pixel_scale", _choice("pm1", "01"), "pm1",
         "scale the threshold applies to: [-1,1] or [0,1]"),
]


def _add_opts(parser: argparse.ArgumentParser, opts: list[_Opt]) -> None:
    for opt in opts:
        parser.add_argument(_flag(opt.name), dest=opt.name, default=None,
                            type=str, help=opt.help)


def _load_config(path: str) -> dict[str, str]:
    values = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"malformed config line: {line!r}")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve(args: argparse.Namespace, opts: list[_Opt]) -> dict[str, Any]:
    """Apply flags > ALFIE_* env > config file > default, with per-option parsing."""
    config = _load_config(args.config) if getattr(args, "config", None) else {}
    resolved: dict[str, Any] = {}
    for opt in opts:
        raw = getattr(args, opt.name, None)
        if raw is None:
            raw = os.environ.get("ALFIE_" + opt.name.upper())
        if raw is None:
            raw = config.get(opt.name)
        if raw is None:
            resolved[opt.name] = opt.default
            continue
        try:
            resolved[opt.name] = opt.parse(raw)
        except ValueError as exc:
            raise UsageError(f"bad value for {_flag(opt.name)}: {exc}") from exc
    return resolved


def _parse_nouns(text: str | None) -> list[str] | None:
    if text is None:
        return None
    entries = [part.strip() for part in text.split(",") if part.strip()]
    if not entries:
        raise UsageError("--nouns given but empty")
    return entries


def _alpha_pipeline(rgb: np.ndarray, trace, cfg: dict[str, Any], seed: int,
                    debug_prefix: str | None = None) -> np.ndarray:
    """Shared back half: attention maps -> alpha -> trimap -> GrabCut -> RGBA."""
    if cfg["k"] < -1:
        raise UsageError(f"--k must be >= -1, got {cfg['k']}")

    exclusion = DEFAULT_EXCLUSION
    if cfg["exclusion_file"]:
        exclusion = load_exclusion_file(cfg["exclusion_file"])
    nouns = select_noun_spans(
        list(trace.token_strings), exclusion, _parse_nouns(cfg["nouns"]),
        source_prompt=trace.prompt,
    )

    maps = aggregate(trace)
    h, w = rgb.shape[:2]
    fg = foreground_cross_map(maps, nouns, h, w)
    ff = fuse_self_attention(maps, fg)
    alpha_hat = estimate_alpha(fg, ff)
    alpha_adj = adjust_opacity(alpha_hat, cfg["k"])
    trimap = quantize_trimap(fg, mode=cfg["trimap_mode"])
    mask = grabcut_refine(
        rgb, trimap,
        iterations=cfg["grabcut_iters"], k=cfg["grabcut_k"],
        gamma=cfg["gamma"], seed=seed,
    )
    alpha = clean_alpha(alpha_adj, mask)

    if debug_prefix is not None:
        write_png_gray(fg, debug_prefix + "_ca_fg.png")
        write_png_gray(ff, debug_prefix + "_ff.png")
        write_png_gray(alpha_hat, debug_prefix + "_alpha_hat.png")
        write_png_gray_bytes(trimap_to_gray(trimap), debug_prefix + "_trimap.png")
    return assemble_rgba(rgb, alpha)


def _debug_prefix(args: argparse.Namespace, out_path: str) -> str | None:
    if not args.dump_debug:
        return None
    return os.path.splitext(out_path)[0]


def cmd_generate(args: argparse.Namespace) -> int:
    gen = _resolve(args, _GENERATION_OPTS)
    alpha_cfg = _resolve(args, _ALPHA_OPTS)
    if args.backend == "trace" and not args.trace_dir:
        raise UsageError("--backend trace requires --trace-dir")
    if gen["prompt"] is None and args.backend != "trace":
        raise UsageError("--prompt is required")
    if not args.out:
        raise UsageError("--out is required")

    if args.backend == "trace":
        trace, rgb = read_trace(args.trace_dir)
    else:
        keep = gen["keep_last_maps"]
        if keep is None:
            keep = min(10, gen["steps"])
        try:
            req = GenerationRequest(
                prompt=gen["prompt"], bg_prompt=gen["bg_prompt"], seed=gen["seed"],
                steps=gen["steps"], guidance=gen["guidance"],
                out_size=gen["size"], border_px=gen["border_px"],
                keep_last_maps=keep,
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        model = init_model(ToyDitConfig(seed=gen["seed"]))
        output = generate(model, req)
        rgb, trace = output.rgb, output.trace
        if args.save_trace:
            write_trace(trace, rgb, args.save_trace)

    rgba = _alpha_pipeline(rgb, trace, alpha_cfg, gen["seed"],
                           _debug_prefix(args, args.out))
    write_png(rgba, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_extract_alpha(args: argparse.Namespace) -> int:
    alpha_cfg = _resolve(args, _ALPHA_OPTS)
    seed = _resolve(args, _SEED_OPT)["seed"]
    if not args.trace_dir:
        raise UsageError("--trace-dir is required")
    if not args.out:
        raise UsageError("--out is required")
    trace, rgb = read_trace(args.trace_dir)
    rgba = _alpha_pipeline(rgb, trace, alpha_cfg, seed,
                           _debug_prefix(args, args.out))
    write_png(rgba, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _resolve(args, _EVAL_OPTS)
    if not args.dir:
        raise UsageError("--dir is required")
    if not os.path.isdir(args.dir):
        raise InputDataError(f"not a directory: {args.dir}")
    names = sorted(n for n in os.listdir(args.dir) if n.lower().endswith(".png"))
    if not names:
        raise InputDataError(f"no .png files in {args.dir}")

    flags = []
    for name in names:
        img = read_png(os.path.join(args.dir, name))[:, :, :3]
        if cfg["pixel_scale"] == "01":
            img = (img + 1.0) / 2.0
        flags.append(empty_border_flags(img, margin=cfg["margin"],
                                        threshold=cfg["threshold"]))

    clip_scores = None
    if args.clip_scores:
        with open(args.clip_scores, "r", encoding="utf-8") as f:
            clip_scores = [float(line) for line in f if line.strip()]
        if len(clip_scores) != len(flags):
            raise InputDataError(
                f"{len(clip_scores)} CLIP scores for {len(flags)} images"
            )
    report = batch_report(flags, clip_scores)
    print(report.render_text())
    if args.report_out:
        with open(args.report_out, "w", encoding="utf-8") as f:
            f.write(report.render_kv())
    return EXIT_OK


def cmd_composite(args: argparse.Namespace) -> int:
    for name in ("fg", "bg", "out"):
        if not getattr(args, name):
            raise UsageError(f"--{name} is required")
    fg = read_png(args.fg)
    if fg.shape[2] != 4:
        raise InputDataError(f"{args.fg} has no alpha channel")
    bg = read_png(args.bg)[:, :, :3]
    if bg.shape[:2] != fg.shape[:2]:
        raise InputDataError(f"size mismatch: fg {fg.shape[:2]} vs bg {bg.shape[:2]}")
    out_rgb = composite_over(fg, bg)
    write_png(assemble_rgba(out_rgb, np.ones(out_rgb.shape[:2])), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alfie",
        description="Training-free RGBA illustration engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="run the pipeline end to end")
    _add_opts(p_gen, _GENERATION_OPTS)
    _add_opts(p_gen, _ALPHA_OPTS)
    p_gen.add_argument("--backend", choices=("toy", "trace"), default="toy")
    p_gen.add_argument("--trace-dir", dest="trace_dir")
    p_gen.add_argument("--out")
    p_gen.add_argument("--save-trace", dest="save_trace",
                       help="also write the attention trace directory here")
    p_gen.add_argument("--dump-debug", dest="dump_debug", action="store_true")
    p_gen.add_argument("--config", help="key = value file mirroring the flags")
    p_gen.set_defaults(func=cmd_generate)

    p_ext = sub.add_parser("extract-alpha", help="alpha-estimate a recorded trace")
    _add_opts(p_ext, _ALPHA_OPTS)
    _add_opts(p_ext, _SEED_OPT)
    p_ext.add_argument("--trace-dir", dest="trace_dir")
    p_ext.add_argument("--out")
    p_ext.add_argument("--dump-debug", dest="dump_debug", action="store_true")
    p_ext.add_argument("--config", help="key = value file mirroring the flags")
    p_ext.set_defaults(func=cmd_extract_alpha)

    p_eval = sub.add_parser("eval", help="empty-border report over a PNG directory")
    _add_opts(p_eval, _EVAL_OPTS)
    p_eval.add_argument("--dir")
    p_eval.add_argument("--clip-scores", dest="clip_scores",
                        help="newline-separated floats, one per image")
    p_eval.add_argument("--report-out", dest="report_out")
    p_eval.add_argument("--config", help="key = value file mirroring the flags")
    p_eval.set_defaults(func=cmd_eval)

    p_comp = sub.add_parser("composite", help="alpha-over composite onto a background")
    p_comp.add_argument("--fg", help="RGBA PNG")
    p_comp.add_argument("--bg", help="background PNG")
    p_comp.add_argument("--out")
    p_comp.set_defaults(func=cmd_composite)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputDataError, TraceFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

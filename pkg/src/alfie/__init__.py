"""Training-free RGBA illustration engine.

Pipeline: centered subject generation on a toy diffusion transformer (or a
recorded attention trace from a real model), attention-derived alpha
estimation, GrabCut cleanup, RGBA assembly.
"""

from .attention import (
    AttentionRecord,
    AttentionTrace,
    GlobalMaps,
    adjust_opacity,
    aggregate,
    estimate_alpha,
    foreground_cross_map,
    fuse_self_attention,
    minmax_normalize,
)
from .evalmetrics import BorderFlags, Report, batch_report, empty_border_flags
from .generation import (
    GenerationOutput,
    GenerationRequest,
    StepSnapshot,
    blend_latents,
    generate,
    make_center_mask,
)
from .grabcut import (
    ColorGmm,
    FlowGraph,
    build_graph,
    clean_alpha,
    fit_gmm,
    grabcut_refine,
    max_flow,
)
from .imaging import (
    assemble_rgba,
    bilinear_resize,
    composite_over,
    read_png,
    write_png,
    write_png_gray,
)
from .prompts import (
    DEFAULT_EXCLUSION,
    NounSpans,
    extract_nouns,
    load_exclusion_file,
    select_noun_spans,
    tokenize,
)
from .sampler import NoiseSchedule, build_schedule, cfg_combine, euler_step, scale_model_input
from .toymodel import (
    PromptEmbedding,
    ToyDitConfig,
    ToyModel,
    decode,
    embed_prompt,
    estimate_noise,
    init_model,
    weights_digest,
)
from .traceio import TraceFormatError, read_trace, write_trace
from .trimap import PROB_BG, PROB_FG, SURE_BG, SURE_FG, quantize_trimap

__version__ = "0.1.0"

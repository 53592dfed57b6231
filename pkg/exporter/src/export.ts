/**
 * Drive a pipeline, keep the subject branch's attention for the last N
 * steps, pre-average the maps, and write an engine-readable trace
 * directory.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { ManifestFields, renderManifest, TensorEntry } from "./manifest.js";
import { AttentionObservation, DitPipeline, RunOptions } from "./pipeline.js";
import { assertShape, NdArray, RunningMean, toLittleEndianBytes } from "./tensor.js";

export interface ExportOptions extends RunOptions {
  keepLast: number;
  outDir: string;
}

export interface ExportResult {
  manifestPath: string;
  stepsRecorded: number[];
  recordsAveraged: number;
}

export function exportTrace(pipeline: DitPipeline, options: ExportOptions): ExportResult {
  if (options.keepLast < 1 || options.keepLast > options.steps) {
    throw new Error(`keepLast must be in [1, steps], got ${options.keepLast}`);
  }
  const [gh, gw] = pipeline.tokenGrid;
  const tokens = pipeline.tokenize(options.prompt);
  if (tokens.length === 0) {
    throw new Error("prompt produced no tokens; nothing to record attention for");
  }
  const n = tokens.length;
  const recordFrom = options.steps - options.keepLast;

  const crossMean = new RunningMean();
  const selfMean = new RunningMean();
  const stepsSeen = new Set<number>();

  const onAttention = (obs: AttentionObservation) => {
    // batch-of-four convention: only the text-conditioned subject branch
    // survives, and only over the trailing keepLast steps
    if (obs.branch !== "fg-text" || obs.step < recordFrom) return;
    assertShape(obs.cross, [gh, gw, n], "cross");
    assertShape(obs.self, [gh * gw, gh, gw], "self");
    crossMean.add(obs.cross);
    selfMean.add(obs.self);
    stepsSeen.add(obs.timestep);
  };

  const result = pipeline.run(options, onAttention);

  const expected = options.keepLast * pipeline.layers * pipeline.heads;
  if (crossMean.n !== expected) {
    throw new Error(
      `pipeline reported ${crossMean.n} subject-branch records, expected ${expected}; ` +
      "hook placement drifted from the manifest schema",
    );
  }
  const stepsRecorded = result.timesteps.slice(recordFrom);
  if (stepsRecorded.length !== stepsSeen.size || !stepsRecorded.every((t) => stepsSeen.has(t))) {
    throw new Error("recorded timesteps disagree with the pipeline's sampling chain");
  }

  fs.mkdirSync(options.outDir, { recursive: true });
  const tensors: TensorEntry[] = [];
  const writeTensor = (name: string, tensor: NdArray) => {
    for (const v of tensor.data) {
      if (!Number.isFinite(v)) throw new Error(`tensor ${name} contains non-finite values`);
    }
    const filename = `${name}.f32`;
    fs.writeFileSync(path.join(options.outDir, filename), toLittleEndianBytes(tensor));
    tensors.push({ name, dtype: "float32", shape: [...tensor.shape], filename });
  };
  writeTensor("cross_mean", crossMean.mean());
  writeTensor("self_mean", selfMean.mean());
  assertShape(result.rgb, [options.size[0], options.size[1], 3], "rgb");
  writeTensor("rgb", result.rgb);

  const manifest: ManifestFields = {
    prompt: options.prompt,
    bgPrompt: options.bgPrompt,
    tokenStrings: tokens,
    tokenGrid: pipeline.tokenGrid,
    imageSize: options.size,
    stepsRecorded,
    layers: pipeline.layers,
    heads: pipeline.heads,
    sigmaSchedule: result.sigmas,
    preaveraged: true,
    tensors,
  };
  const manifestPath = path.join(options.outDir, "manifest.txt");
  fs.writeFileSync(manifestPath, renderManifest(manifest), "utf-8");
  return { manifestPath, stepsRecorded, recordsAveraged: crossMean.n };
}

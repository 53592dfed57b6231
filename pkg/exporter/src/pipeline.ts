/**
 * The pipeline boundary the exporter drives.
 *
 * A runtime adapter wraps a real text-to-image diffusion-transformer
 * pipeline: it runs the four-branch centered-generation loop (null/bg,
 * text/bg, null/fg, text/fg) and reports every attention softmax it
 * computes through the observation callback. The exporter decides what to
 * keep. A deterministic stub implementation ships here so the export
 * machinery and the trace format can be exercised with no model runtime
 * installed; see the README for wiring a real one.
 */

import { hashString, Prng } from "./prng.js";
import { NdArray, zeros } from "./tensor.js";

export type Branch = "bg-null" | "bg-text" | "fg-null" | "fg-text";

export interface AttentionObservation {
  step: number;
  timestep: number;
  layer: number;
  head: number;
  branch: Branch;
  /** gh x gw x N softmax rows over the prompt tokens */
  cross: NdArray;
  /** (gh*gw) x gh x gw softmax map per source pixel */
  self: NdArray;
}

export interface RunOptions {
  prompt: string;
  bgPrompt: string;
  seed: number;
  steps: number;
  guidance: number;
  borderPx: number;
  size: [number, number];
}

export interface RunResult {
  /** decoded image, h x w x 3, values in [-1, 1] */
  rgb: NdArray;
  /** sampler sigma chain, steps + 1 entries ending in 0 */
  sigmas: number[];
  /** training timestep per step, descending */
  timesteps: number[];
}

export interface DitPipeline {
  readonly name: string;
  readonly layers: number;
  readonly heads: number;
  readonly tokenGrid: [number, number];
  tokenize(prompt: string): string[];
  run(options: RunOptions, onAttention: (obs: AttentionObservation) => void): RunResult;
}

const BRANCHES: Branch[] = ["bg-null", "bg-text", "fg-null", "fg-text"];

/** Same rule as the engine: lowercase words, punctuation as own tokens. */
export function tokenize(prompt: string): string[] {
  return prompt.toLowerCase().match(/[a-z0-9]+(?:['-][a-z0-9]+)*|[^\s]/g) ?? [];
}

/** Linear-beta sigma chain, trailing-anchored, matching the engine's sampler. */
export function sigmaSchedule(steps: number, trainSteps = 1000): { sigmas: number[]; timesteps: number[] } {
  const betaStart = 1e-4;
  const betaEnd = 0.02;
  const abar: number[] = [];
  let prod = 1.0;
  for (let i = 0; i < trainSteps; i++) {
    const beta = betaStart + ((betaEnd - betaStart) * i) / (trainSteps - 1);
    prod *= 1.0 - beta;
    abar.push(prod);
  }
  const stride = Math.floor(trainSteps / steps);
  const timesteps: number[] = [];
  const sigmas: number[] = [];
  for (let i = 0; i < steps; i++) {
    const t = trainSteps - 1 - stride * i;
    timesteps.push(t);
    sigmas.push(Math.sqrt((1 - abar[t]) / abar[t]));
  }
  sigmas.push(0.0);
  return { sigmas, timesteps };
}

/**
 * Deterministic stand-in for a real DiT pipeline.
 *
 * Renders a round subject on a light field and emits attention maps with
 * the structure the engine expects: subject-noun cross attention peaks
 * inside the subject, self attention is cohesive within regions, and
 * every softmax row sums to 1. All values are pure functions of the seed.
 */
export class StubDitPipeline implements DitPipeline {
  readonly name = "stub";
  readonly layers: number;
  readonly heads: number;
  readonly tokenGrid: [number, number];

  constructor(layers = 2, heads = 2, grid = 8) {
    this.layers = layers;
    this.heads = heads;
    this.tokenGrid = [grid, grid];
  }

  tokenize(prompt: string): string[] {
    return tokenize(prompt);
  }

  run(options: RunOptions, onAttention: (obs: AttentionObservation) => void): RunResult {
    const [gh, gw] = this.tokenGrid;
    const tokens = this.tokenize(options.prompt);
    const n = Math.max(tokens.length, 1);
    const { sigmas, timesteps } = sigmaSchedule(options.steps);
    const [h, w] = options.size;

    // subject footprint on the token grid: disk at the canvas center
    const radius = 0.30 * Math.min(gh, gw);
    const inside = (y: number, x: number) => {
      const dy = y - (gh - 1) / 2;
      const dx = x - (gw - 1) / 2;
      return Math.sqrt(dy * dy + dx * dx) <= radius;
    };

    for (let step = 0; step < options.steps; step++) {
      for (const branch of BRANCHES) {
        for (let layer = 0; layer < this.layers; layer++) {
          for (let head = 0; head < this.heads; head++) {
            const rng = new Prng(
              (options.seed ^ hashString(`${branch}/${step}/${layer}/${head}`)) >>> 0,
            );
            onAttention({
              step,
              timestep: timesteps[step],
              layer,
              head,
              branch,
              cross: this.crossMap(rng, gh, gw, n, inside),
              self: this.selfMap(rng, gh, gw, inside),
            });
          }
        }
      }
    }

    return { rgb: this.render(options.seed, h, w), sigmas, timesteps };
  }

  private crossMap(
    rng: Prng, gh: number, gw: number, n: number,
    inside: (y: number, x: number) => boolean,
  ): NdArray {
    const cross = zeros([gh, gw, n]);
    for (let y = 0; y < gh; y++) {
      for (let x = 0; x < gw; x++) {
        let sum = 0;
        const base = (y * gw + x) * n;
        for (let tok = 0; tok < n; tok++) {
          // the last token plays the subject noun and lights up the disk
          const subjectBoost = tok === n - 1 && inside(y, x) ? 4.0 : 0.0;
          const v = Math.exp(subjectBoost + rng.uniform(0, 0.5));
          cross.data[base + tok] = v;
          sum += v;
        }
        for (let tok = 0; tok < n; tok++) cross.data[base + tok] /= sum;
      }
    }
    return cross;
  }

  private selfMap(
    rng: Prng, gh: number, gw: number,
    inside: (y: number, x: number) => boolean,
  ): NdArray {
    const p = gh * gw;
    const self = zeros([p, gh, gw]);
    for (let src = 0; src < p; src++) {
      const srcInside = inside(Math.floor(src / gw), src % gw);
      let sum = 0;
      for (let y = 0; y < gh; y++) {
        for (let x = 0; x < gw; x++) {
          const cohesive = inside(y, x) === srcInside ? 1.0 : 0.1;
          const v = cohesive * Math.exp(rng.uniform(0, 0.3));
          self.data[src * p + y * gw + x] = v;
          sum += v;
        }
      }
      for (let i = 0; i < p; i++) self.data[src * p + i] /= sum;
    }
    return self;
  }

  private render(seed: number, h: number, w: number): NdArray {
    const rng = new Prng(seed ^ 0xa5f1);
    const hue = rng.uniform(0, 1);
    const subject: [number, number, number] = [
      0.9 * Math.cos(hue * 6.283) - 0.1,
      0.7 * Math.sin(hue * 6.283),
      -0.6,
    ];
    const rgb = zeros([h, w, 3]);
    const radius = 0.3 * Math.min(h, w);
    for (let y = 0; y < h; y++) {
      for (let x = 0; x < w; x++) {
        const dy = y - (h - 1) / 2;
        const dx = x - (w - 1) / 2;
        const inDisk = Math.sqrt(dy * dy + dx * dx) <= radius;
        const base = (y * w + x) * 3;
        for (let c = 0; c < 3; c++) {
          const v = inDisk ? subject[c] : 0.93;
          rgb.data[base + c] = Math.max(-1, Math.min(1, v + rng.uniform(-0.02, 0.02)));
        }
      }
    }
    return rgb;
  }
}

export class ModelRuntimeError extends Error {}

/**
 * Resolve a pipeline spec: "stub" is built in; anything else is treated as
 * a module path whose default export implements DitPipeline (that is the
 * plug-in plane for real runtimes).
 */
export async function loadPipeline(spec: string): Promise<DitPipeline> {
  if (spec === "stub") return new StubDitPipeline();
  let mod: { default?: new () => DitPipeline };
  try {
    mod = await import(spec);
  } catch (err) {
    throw new ModelRuntimeError(
      `model runtime not present: could not import ${JSON.stringify(spec)} ` +
      `(${(err as Error).message}); pass "stub" or a module implementing DitPipeline`,
    );
  }
  if (typeof mod.default !== "function") {
    throw new ModelRuntimeError(`module ${spec} has no default DitPipeline export`);
  }
  return new mod.default();
}

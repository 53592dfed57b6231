/**
 * Manifest rendering and trace-directory validation.
 *
 * The format is documented in ../../docs/trace-format.md and must stay
 * byte-compatible with the engine's reader: `key = value` lines, repeated
 * `tensor = <name> float32 <dims> <file>` entries, raw little-endian
 * float32 tensor files whose size is 4 * product(shape).
 */

import * as fs from "node:fs";
import * as path from "node:path";

export const FORMAT_VERSION = 1;

export interface TensorEntry {
  name: string;
  dtype: "float32";
  shape: number[];
  filename: string;
}

export interface ManifestFields {
  prompt: string;
  bgPrompt: string;
  tokenStrings: string[];
  tokenGrid: [number, number];
  imageSize: [number, number];
  stepsRecorded: number[];
  layers: number;
  heads: number;
  sigmaSchedule: number[];
  preaveraged: boolean;
  tensors: TensorEntry[];
}

export function renderManifest(m: ManifestFields): string {
  for (const tok of m.tokenStrings) {
    if (tok.length === 0 || /\s/.test(tok)) {
      throw new Error(`token ${JSON.stringify(tok)} cannot round-trip the manifest`);
    }
  }
  const lines = [
    `format_version = ${FORMAT_VERSION}`,
    `prompt = ${m.prompt}`,
    `bg_prompt = ${m.bgPrompt}`,
    `token_strings = ${m.tokenStrings.join(" ")}`,
    `token_grid = ${m.tokenGrid[0]} ${m.tokenGrid[1]}`,
    `image_size = ${m.imageSize[0]} ${m.imageSize[1]}`,
    `steps_recorded = ${m.stepsRecorded.join(" ")}`,
    `layers = ${m.layers}`,
    `heads = ${m.heads}`,
    `sigma_schedule = ${m.sigmaSchedule.map(sigmaRepr).join(" ")}`,
    `preaveraged = ${m.preaveraged ? "true" : "false"}`,
    ...m.tensors.map(
      (t) => `tensor = ${t.name} ${t.dtype} ${t.shape.join("x")} ${t.filename}`,
    ),
  ];
  return lines.join("\n") + "\n";
}

/** Shortest round-trip decimal, matching what the engine's reader accepts. */
function sigmaRepr(x: number): string {
  if (Number.isInteger(x) && Math.abs(x) < 1e15) return `${x}.0`;
  return String(x);
}

export interface ParsedManifest {
  fields: Map<string, string>;
  tensors: TensorEntry[];
}

export function parseManifest(text: string): ParsedManifest {
  const fields = new Map<string, string>();
  const tensors: TensorEntry[] = [];
  for (const rawLine of text.split("\n")) {
    if (rawLine.trim().length === 0) continue;
    const sep = rawLine.indexOf(" = ");
    if (sep < 0) throw new Error(`malformed manifest line: ${JSON.stringify(rawLine)}`);
    const key = rawLine.slice(0, sep);
    const value = rawLine.slice(sep + 3);
    if (key === "tensor") {
      const parts = value.split(" ");
      if (parts.length !== 4) throw new Error(`malformed tensor entry: ${JSON.stringify(value)}`);
      const [name, dtype, dims, filename] = parts;
      if (dtype !== "float32") throw new Error(`tensor ${name} has unsupported dtype ${dtype}`);
      const shape = dims.split("x").map((d) => {
        const n = Number(d);
        if (!Number.isInteger(n) || n < 1) throw new Error(`tensor ${name} has malformed shape ${dims}`);
        return n;
      });
      tensors.push({ name, dtype, shape, filename });
    } else {
      fields.set(key, value);
    }
  }
  return { fields, tensors };
}

/**
 * Fail-closed schema validation of a written trace directory: version,
 * required fields, declared shapes against actual file sizes, and the
 * tensor set implied by the mode. Throws naming the first offender.
 */
export function validateTraceDir(dir: string): ParsedManifest {
  const manifestPath = path.join(dir, "manifest.txt");
  if (!fs.existsSync(manifestPath)) throw new Error(`no manifest.txt in ${dir}`);
  const parsed = parseManifest(fs.readFileSync(manifestPath, "utf-8"));
  const { fields, tensors } = parsed;

  if (fields.get("format_version") !== String(FORMAT_VERSION)) {
    throw new Error(`unsupported trace format version ${fields.get("format_version")}`);
  }
  const required = [
    "token_strings", "token_grid", "image_size", "steps_recorded",
    "layers", "heads", "sigma_schedule", "preaveraged",
  ];
  for (const key of required) {
    if (!fields.has(key)) throw new Error(`manifest is missing the ${key} field`);
  }

  const byName = new Map<string, TensorEntry>();
  for (const entry of tensors) {
    byName.set(entry.name, entry);
    const filePath = path.join(dir, entry.filename);
    if (!fs.existsSync(filePath)) throw new Error(`tensor ${entry.name} file missing: ${entry.filename}`);
    const expected = entry.shape.reduce((a, b) => a * b, 1) * 4;
    const actual = fs.statSync(filePath).size;
    if (actual !== expected) {
      throw new Error(
        `tensor ${entry.name}: declared shape ${entry.shape.join("x")} needs ${expected} bytes, file has ${actual}`,
      );
    }
  }

  const [gh, gw] = fields.get("token_grid")!.split(" ").map(Number);
  const [h, w] = fields.get("image_size")!.split(" ").map(Number);
  const n = fields.get("token_strings")!.split(" ").length;
  const expectShape = (name: string, shape: number[]) => {
    const entry = byName.get(name);
    if (!entry) throw new Error(`manifest declares no ${name} tensor`);
    if (entry.shape.length !== shape.length || entry.shape.some((d, i) => d !== shape[i])) {
      throw new Error(`tensor ${name} shape ${entry.shape.join("x")} should be ${shape.join("x")}`);
    }
  };
  expectShape("rgb", [h, w, 3]);
  if (fields.get("preaveraged") === "true") {
    expectShape("cross_mean", [gh, gw, n]);
    expectShape("self_mean", [gh * gw, gh, gw]);
  } else {
    const steps = fields.get("steps_recorded")!.split(" ").filter((s) => s.length).map(Number);
    const layers = Number(fields.get("layers"));
    const heads = Number(fields.get("heads"));
    for (const t of steps) {
      for (let l = 0; l < layers; l++) {
        for (let hd = 0; hd < heads; hd++) {
          const suffix = `t${String(t).padStart(5, "0")}_l${String(l).padStart(2, "0")}_h${String(hd).padStart(2, "0")}`;
          expectShape(`cross_${suffix}`, [gh, gw, n]);
          expectShape(`self_${suffix}`, [gh * gw, gh, gw]);
        }
      }
    }
  }
  return parsed;
}

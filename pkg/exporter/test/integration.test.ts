/**
 * End-to-end contract test: an exported trace is consumed by the engine's
 * extract-alpha command and yields a valid RGBA PNG.
 *
 * Needs the python engine importable as `alfie`; skipped otherwise (and
 * the real-model export is skipped unless a runtime module is installed).
 */

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { describe, expect, it } from "vitest";

import { exportTrace } from "../src/export.js";
import { StubDitPipeline } from "../src/pipeline.js";
import { validateTraceDir } from "../src/manifest.js";

function pythonWithEngine(): string | null {
  for (const python of ["python3", "python"]) {
    const probe = spawnSync(python, ["-c", "import alfie"], { timeout: 30_000 });
    if (probe.status === 0) return python;
  }
  return null;
}

function realRuntimePresent(): boolean {
  // the plug-in plane: a module implementing DitPipeline, named via env
  return Boolean(process.env.ALFIE_EXPORTER_MODEL);
}

const python = pythonWithEngine();

describe("engine integration", () => {
  it.skipIf(python === null)(
    "stub export -> extract-alpha -> valid RGBA PNG",
    () => {
      const work = fs.mkdtempSync(path.join(os.tmpdir(), "alfie-integ-"));
      try {
        const traceDir = path.join(work, "trace");
        exportTrace(new StubDitPipeline(), {
          prompt: "A green dragon",
          bgPrompt: "a white background",
          seed: 11,
          steps: 30,
          guidance: 4.5,
          borderPx: 16,
          size: [64, 64],
          keepLast: 10,
          outDir: traceDir,
        });
        validateTraceDir(traceDir);

        const outPng = path.join(work, "out.png");
        const run = spawnSync(
          python!,
          ["-m", "alfie.cli", "extract-alpha", "--trace-dir", traceDir,
           "--out", outPng, "--seed", "11"],
          { encoding: "utf-8", timeout: 120_000 },
        );
        expect(run.stderr).toBe("");
        expect(run.status).toBe(0);

        const png = fs.readFileSync(outPng);
        // PNG signature, IHDR 64x64, bit depth 8, color type 6 (RGBA)
        expect(png.subarray(0, 8)).toEqual(
          Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
        );
        expect(png.subarray(12, 16).toString("ascii")).toBe("IHDR");
        expect(png.readUInt32BE(16)).toBe(64);
        expect(png.readUInt32BE(20)).toBe(64);
        expect(png[24]).toBe(8);
        expect(png[25]).toBe(6);
      } finally {
        fs.rmSync(work, { recursive: true, force: true });
      }
    },
    120_000,
  );

  it.skipIf(!realRuntimePresent())(
    "real model runtime export (ALFIE_EXPORTER_MODEL)",
    async () => {
      const { loadPipeline } = await import("../src/pipeline.js");
      const pipeline = await loadPipeline(process.env.ALFIE_EXPORTER_MODEL!);
      const work = fs.mkdtempSync(path.join(os.tmpdir(), "alfie-real-"));
      try {
        const result = exportTrace(pipeline, {
          prompt: "A green dragon",
          bgPrompt: "a white background",
          seed: 1,
          steps: 30,
          guidance: 4.5,
          borderPx: 64,
          size: [512, 512],
          keepLast: 10,
          outDir: path.join(work, "trace"),
        });
        expect(result.stepsRecorded).toHaveLength(10);
        validateTraceDir(path.join(work, "trace"));
      } finally {
        fs.rmSync(work, { recursive: true, force: true });
      }
    },
    600_000,
  );
});

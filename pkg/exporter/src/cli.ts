/**
 * Trace exporter CLI; flags mirror the engine's `generate` command plus
 * --keep-last / --out-dir / --model.
 *
 *   node dist/cli.js --prompt "A green dragon" --seed 1 --steps 30 \
 *        --keep-last 10 --out-dir trace/ --model stub
 */

import { pathToFileURL } from "node:url";

import { exportTrace } from "./export.js";
import { loadPipeline, ModelRuntimeError } from "./pipeline.js";

interface CliFlags {
  prompt?: string;
  bgPrompt: string;
  seed: number;
  steps: number;
  guidance: number;
  borderPx: number;
  size: [number, number];
  keepLast: number;
  outDir?: string;
  model: string;
}

const USAGE = `usage: export --prompt TEXT --out-dir DIR
              [--bg-prompt TEXT] [--seed N] [--steps N] [--guidance X]
              [--border-px N] [--size H | HxW] [--keep-last N]
              [--model stub|<module-path>]`;

export function parseFlags(argv: string[]): CliFlags {
  const flags: CliFlags = {
    bgPrompt: "a white background",
    seed: 0,
    steps: 30,
    guidance: 4.5,
    borderPx: 64,
    size: [64, 64],
    keepLast: 10,
    model: "stub",
  };
  const takeValue = (i: number, name: string): string => {
    if (i + 1 >= argv.length) throw new Error(`${name} needs a value`);
    return argv[i + 1];
  };
  const int = (text: string, name: string): number => {
    const v = Number(text);
    if (!Number.isInteger(v)) throw new Error(`${name} must be an integer, got ${text}`);
    return v;
  };
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    switch (flag) {
      case "--prompt": flags.prompt = takeValue(i, flag); break;
      case "--bg-prompt": flags.bgPrompt = takeValue(i, flag); break;
      case "--seed": flags.seed = int(takeValue(i, flag), flag); break;
      case "--steps": flags.steps = int(takeValue(i, flag), flag); break;
      case "--guidance": flags.guidance = Number(takeValue(i, flag)); break;
      case "--border-px": flags.borderPx = int(takeValue(i, flag), flag); break;
      case "--keep-last": flags.keepLast = int(takeValue(i, flag), flag); break;
      case "--out-dir": flags.outDir = takeValue(i, flag); break;
      case "--model": flags.model = takeValue(i, flag); break;
      case "--size": {
        const parts = takeValue(i, flag).toLowerCase().split("x").map((p) => int(p, flag));
        flags.size = parts.length === 1 ? [parts[0], parts[0]] : [parts[0], parts[1]];
        break;
      }
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!flags.prompt) throw new Error("--prompt is required");
  if (!flags.outDir) throw new Error("--out-dir is required");
  return flags;
}

export async function main(argv: string[]): Promise<number> {
  let flags: CliFlags;
  try {
    flags = parseFlags(argv);
  } catch (err) {
    console.error(`error: ${(err as Error).message}\n${USAGE}`);
    return 2;
  }
  try {
    const pipeline = await loadPipeline(flags.model);
    const result = exportTrace(pipeline, {
      prompt: flags.prompt!,
      bgPrompt: flags.bgPrompt,
      seed: flags.seed,
      steps: flags.steps,
      guidance: flags.guidance,
      borderPx: flags.borderPx,
      size: flags.size,
      keepLast: flags.keepLast,
      outDir: flags.outDir!,
    });
    console.log(
      `exported ${result.recordsAveraged} subject-branch records over ` +
      `${result.stepsRecorded.length} steps -> ${result.manifestPath}`,
    );
    return 0;
  } catch (err) {
    if (err instanceof ModelRuntimeError) {
      console.error(`error: ${err.message}`);
      return 3;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  main(process.argv.slice(2)).then((code) => process.exit(code));
}

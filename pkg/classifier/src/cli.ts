#!/usr/bin/env node
/** Command line front end.
 *
 *   pathlab-classifier detect --bundle DIR --out-dir DIR
 *                             [--epochs N] [--lambda F] [--seed N]
 *
 * Exit codes: 0 done, 1 pipeline failure, 2 usage error.
 */

import { runDetect, DETECT_DEFAULTS } from "./detect";

const USAGE =
  "usage: pathlab-classifier detect --bundle DIR --out-dir DIR " +
  "[--epochs N] [--lambda F] [--seed N]";

interface Parsed {
  bundle?: string;
  outDir?: string;
  epochs: number;
  lambda: number;
  seed: number;
}

function parseArgs(argv: string[]): Parsed {
  const out: Parsed = { ...DETECT_DEFAULTS };
  for (let k = 0; k < argv.length; k++) {
    const flag = argv[k];
    const next = () => {
      k += 1;
      if (k >= argv.length) throw new UsageError(`${flag} wants a value`);
      return argv[k];
    };
    switch (flag) {
      case "--bundle":
        out.bundle = next();
        break;
      case "--out-dir":
        out.outDir = next();
        break;
      case "--epochs":
        out.epochs = parseInt(next(), 10);
        if (!Number.isInteger(out.epochs) || out.epochs <= 0) {
          throw new UsageError("--epochs wants a positive integer");
        }
        break;
      case "--lambda":
        out.lambda = parseFloat(next());
        if (!(out.lambda >= 0 && out.lambda <= 1)) {
          throw new UsageError("--lambda wants a value in [0, 1]");
        }
        break;
      case "--seed":
        out.seed = parseInt(next(), 10);
        if (!Number.isInteger(out.seed)) throw new UsageError("--seed wants an integer");
        break;
      default:
        throw new UsageError(`unknown flag ${flag}`);
    }
  }
  if (!out.bundle || !out.outDir) throw new UsageError("--bundle and --out-dir are required");
  return out;
}

class UsageError extends Error {}

export function main(argv: string[]): number {
  if (argv.length === 0 || argv[0] !== "detect") {
    process.stderr.write(USAGE + "\n");
    return 2;
  }
  let parsed: Parsed;
  try {
    parsed = parseArgs(argv.slice(1));
  } catch (err) {
    if (err instanceof UsageError) {
      process.stderr.write(`${err.message}\n${USAGE}\n`);
      return 2;
    }
    throw err;
  }
  try {
    const result = runDetect({
      bundle: parsed.bundle!,
      outDir: parsed.outDir!,
      epochs: parsed.epochs,
      lambda: parsed.lambda,
      seed: parsed.seed,
    });
    process.stderr.write(
      `train_acc ${result.trainAccuracy.toFixed(3)} test_acc ${result.testAccuracy.toFixed(3)}\n`
    );
    return 0;
  } catch (err) {
    process.stderr.write(`detect failed: ${(err as Error).message}\n`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}

/** Programmatic entry for the detect flow: read a bundle, train on its
 * split, write one verdict line per path plus a metrics summary. */

import * as fs from "fs";
import * as path from "path";
import { readBundle } from "./bundle";
import { Model, DEFAULT_MODEL, ModelConfig } from "./model";

export interface DetectOptions {
  bundle: string;
  outDir: string;
  epochs: number;
  lambda: number;
  seed: number;
  quiet?: boolean;
}

export const DETECT_DEFAULTS = { epochs: 50, lambda: DEFAULT_MODEL.lambda, seed: DEFAULT_MODEL.seed };

export interface DetectResult {
  verdictsFile: string;
  metricsFile: string;
  trainAccuracy: number;
  testAccuracy: number;
}

export function runDetect(opts: DetectOptions): DetectResult {
  const bundle = readBundle(opts.bundle);
  if (!bundle.split) {
    throw new Error(`bundle at ${opts.bundle} has no split record; detect needs a supervised export`);
  }
  const cfg: ModelConfig = { ...DEFAULT_MODEL, lambda: opts.lambda, seed: opts.seed };
  const model = new Model(bundle, cfg);
  model.train(opts.epochs, (epoch, loss, acc) => {
    if (!opts.quiet && (epoch % 10 === 0 || epoch === opts.epochs - 1)) {
      process.stderr.write(`epoch ${epoch}: loss ${loss.toFixed(4)} train_acc ${acc.toFixed(3)}\n`);
    }
  });

  fs.mkdirSync(opts.outDir, { recursive: true });

  const verdictsFile = path.join(opts.outDir, "verdicts");
  const lines = model.verdicts().map((v) => JSON.stringify(v, Object.keys(v).sort()));
  fs.writeFileSync(verdictsFile, lines.join("\n") + "\n");

  const trainIdx = bundle.split.train_ids.map((id) => model.idToIndex.get(id)!);
  const testIdx = bundle.split.test_ids.map((id) => model.idToIndex.get(id)!);
  const trainAccuracy = model.accuracy(trainIdx);
  const testAccuracy = testIdx.length > 0 ? model.accuracy(testIdx) : 0;

  const metricsFile = path.join(opts.outDir, "metrics");
  const metrics = {
    classes: model.classes,
    epochs: opts.epochs,
    lambda: opts.lambda,
    seed: opts.seed,
    n_paths: bundle.paths.length,
    n_train: trainIdx.length,
    n_test: testIdx.length,
    train_accuracy: trainAccuracy,
    test_accuracy: testAccuracy,
  };
  fs.writeFileSync(metricsFile, JSON.stringify(metrics, Object.keys(metrics).sort(), 2) + "\n");

  return { verdictsFile, metricsFile, trainAccuracy, testAccuracy };
}

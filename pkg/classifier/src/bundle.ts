/** Reader for the four-file dataset bundle the analysis pipeline exports.
 *
 * paths  - one JSON record per line: {entry, id, label?, tokens}
 * graph  - JSON header line, then "i j weight" triples (upper triangle,
 *          unit diagonal included; path rows precede opcode rows)
 * vocab  - one token per line, index = vocab id
 * split  - optional single JSON record with train/test ids and
 *          oversample multiplicities
 */

import * as fs from "fs";
import * as path from "path";

export interface PathRecord {
  id: string;
  entry: string;
  tokens: string[];
  label?: string;
}

export interface GraphHeader {
  format_version: number;
  n_path: number;
  n_opcode: number;
  log_base: string;
  window: number;
}

export interface GraphTriple {
  i: number;
  j: number;
  w: number;
}

export interface SplitRecord {
  train_ids: string[];
  test_ids: string[];
  seed: number;
  oversample_counts: Record<string, number>;
}

export interface Bundle {
  paths: PathRecord[];
  header: GraphHeader;
  triples: GraphTriple[];
  vocab: string[];
  split: SplitRecord | null;
}

export class BundleError extends Error {}

function readLines(file: string): string[] {
  return fs
    .readFileSync(file, "utf8")
    .split("\n")
    .filter((line) => line.length > 0);
}

export function readBundle(dir: string): Bundle {
  for (const name of ["paths", "graph", "vocab"]) {
    if (!fs.existsSync(path.join(dir, name))) {
      throw new BundleError(`bundle at ${dir} is missing its ${name} file`);
    }
  }

  const paths: PathRecord[] = readLines(path.join(dir, "paths")).map((line, k) => {
    const doc = JSON.parse(line);
    if (typeof doc.id !== "string" || !Array.isArray(doc.tokens)) {
      throw new BundleError(`paths line ${k + 1}: bad record`);
    }
    return doc as PathRecord;
  });

  const graphLines = readLines(path.join(dir, "graph"));
  if (graphLines.length === 0) throw new BundleError("graph file is empty");
  const header = JSON.parse(graphLines[0]) as GraphHeader;
  const triples: GraphTriple[] = [];
  for (let k = 1; k < graphLines.length; k++) {
    const parts = graphLines[k].split(" ");
    if (parts.length !== 3) throw new BundleError(`graph line ${k + 1}: want "i j w"`);
    const i = parseInt(parts[0], 10);
    const j = parseInt(parts[1], 10);
    const w = parseFloat(parts[2]);
    if (!Number.isInteger(i) || !Number.isInteger(j) || !Number.isFinite(w)) {
      throw new BundleError(`graph line ${k + 1}: bad triple`);
    }
    triples.push({ i, j, w });
  }

  const vocab = readLines(path.join(dir, "vocab"));

  let split: SplitRecord | null = null;
  const splitFile = path.join(dir, "split");
  if (fs.existsSync(splitFile)) {
    const doc = JSON.parse(fs.readFileSync(splitFile, "utf8"));
    if (!Array.isArray(doc.train_ids) || !Array.isArray(doc.test_ids)) {
      throw new BundleError("split file: want train_ids and test_ids arrays");
    }
    split = {
      train_ids: doc.train_ids,
      test_ids: doc.test_ids,
      seed: doc.seed ?? 0,
      oversample_counts: doc.oversample_counts ?? {},
    };
  }

  if (header.n_path !== paths.length) {
    throw new BundleError(
      `graph header says ${header.n_path} paths, paths file has ${paths.length}`
    );
  }
  if (header.n_opcode !== vocab.length) {
    throw new BundleError(
      `graph header says ${header.n_opcode} opcodes, vocab has ${vocab.length}`
    );
  }

  return { paths, header, triples, vocab, split };
}

/** Distinct labels in first-appearance order, for a stable class index. */
export function labelSet(paths: PathRecord[]): string[] {
  const seen: string[] = [];
  for (const p of paths) {
    if (p.label !== undefined && !seen.includes(p.label)) seen.push(p.label);
  }
  return seen.sort();
}

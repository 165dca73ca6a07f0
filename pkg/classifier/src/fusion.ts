/** Logit fusion and the class-weighted loss.
 *
 * fuseLogits returns the untouched branch array at the endpoints so a
 * lambda of exactly 0 or 1 reproduces the single-branch model bit for
 * bit; anything between mixes elementwise.
 */

import { Mat, softmaxRows } from "./mat";

export function fuseLogits(seq: Float64Array, graph: Float64Array, lambda: number): Float64Array {
  if (seq.length !== graph.length) throw new Error("fuse: branch width mismatch");
  if (lambda < 0 || lambda > 1) throw new Error("fuse: lambda outside [0, 1]");
  if (lambda === 0) return graph.slice();
  if (lambda === 1) return seq.slice();
  const out = new Float64Array(seq.length);
  for (let k = 0; k < seq.length; k++) {
    out[k] = lambda * seq[k] + (1 - lambda) * graph[k];
  }
  return out;
}

/** Inverse-frequency class weights: total / (n_classes * count_c). */
export function classWeights(counts: number[]): Float64Array {
  const total = counts.reduce((a, b) => a + b, 0);
  const w = new Float64Array(counts.length);
  for (let c = 0; c < counts.length; c++) {
    if (counts[c] <= 0) throw new Error(`class ${c} has no examples`);
    w[c] = total / (counts.length * counts[c]);
  }
  return w;
}

/** w_t * (-x_t + log sum_j exp(x_j)) for a single logit row. */
export function weightedCrossEntropy(
  logits: Float64Array,
  target: number,
  weights: Float64Array
): number {
  let max = -Infinity;
  for (let j = 0; j < logits.length; j++) max = Math.max(max, logits[j]);
  let sum = 0;
  for (let j = 0; j < logits.length; j++) sum += Math.exp(logits[j] - max);
  const logSumExp = max + Math.log(sum);
  return weights[target] * (logSumExp - logits[target]);
}

/** Loss gradient wrt the logit row: w_t * (softmax - onehot). */
export function weightedCrossEntropyGrad(
  logits: Float64Array,
  target: number,
  weights: Float64Array
): Float64Array {
  const m = new Mat(1, logits.length, logits.slice());
  const p = softmaxRows(m);
  const g = p.data;
  for (let j = 0; j < g.length; j++) g[j] *= weights[target];
  g[target] -= weights[target];
  return g;
}

export function softmax(logits: Float64Array): Float64Array {
  return softmaxRows(new Mat(1, logits.length, logits.slice())).data;
}

export function argmax(xs: Float64Array): number {
  let best = 0;
  for (let k = 1; k < xs.length; k++) if (xs[k] > xs[best]) best = k;
  return best;
}

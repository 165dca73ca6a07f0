/** Two-branch path classifier: the sequence encoder reads each path's
 * token stream, the graph convolution reads the shared path-opcode
 * graph, and a convex mix of the two logit rows is what gets scored.
 *
 * Training is full-batch: one graph forward per epoch, one encoder
 * forward per training path (oversampled paths just weigh in with
 * their multiplicity), joint weighted cross-entropy on the fused
 * logits plus a small auxiliary term on the sequence branch alone so
 * the encoder cannot hide behind the graph early on.
 */

import { Bundle, PathRecord, labelSet } from "./bundle";
import { propagationMatrix } from "./adjacency";
import { Mat } from "./mat";
import { ParamSet } from "./params";
import { Encoder, EncoderConfig, DEFAULT_ENCODER } from "./encoder";
import { Gcn, GCN_HIDDEN, GCN_DROPOUT } from "./gcn";
import {
  fuseLogits,
  classWeights,
  weightedCrossEntropy,
  weightedCrossEntropyGrad,
  softmax,
  argmax,
} from "./fusion";
import { Rng, mulberry32 } from "./rng";

export interface ModelConfig {
  lambda: number;
  auxWeight: number;
  lr: number;
  seed: number;
  dropout: number;
  encoder?: Partial<Omit<EncoderConfig, "vocabSize" | "nClasses">>;
  hidden?: number;
}

export const DEFAULT_MODEL: ModelConfig = {
  lambda: 0.5,
  auxWeight: 0.1,
  lr: 3e-3,
  seed: 1,
  dropout: GCN_DROPOUT,
};

export interface Verdict {
  id: string;
  entry: string;
  predicted: string;
  probability: number;
  label?: string;
}

export class Model {
  bundle: Bundle;
  cfg: ModelConfig;
  classes: string[];
  set: ParamSet;
  encoder: Encoder;
  gcn: Gcn;
  s: Mat;
  rng: Rng;
  contentIds: (number | null)[][];
  targets: Int32Array; // -1 when unlabeled
  idToIndex: Map<string, number>;

  constructor(bundle: Bundle, cfg: ModelConfig = DEFAULT_MODEL) {
    this.bundle = bundle;
    this.cfg = cfg;
    this.classes = labelSet(bundle.paths);
    if (this.classes.length < 2) {
      throw new Error(`need at least two labels to classify, found ${this.classes.length}`);
    }
    this.rng = mulberry32(cfg.seed);
    this.set = new ParamSet();

    const encCfg: EncoderConfig = {
      ...DEFAULT_ENCODER,
      ...(cfg.encoder ?? {}),
      vocabSize: bundle.vocab.length,
      nClasses: this.classes.length,
    };
    this.encoder = new Encoder(encCfg, this.set, this.rng);

    const nNodes = bundle.header.n_path + bundle.header.n_opcode;
    this.s = propagationMatrix(nNodes, bundle.triples);
    this.gcn = new Gcn(
      {
        nNodes,
        hidden: cfg.hidden ?? GCN_HIDDEN,
        nClasses: this.classes.length,
        dropout: cfg.dropout,
      },
      this.set,
      this.rng
    );

    const vocabIndex = new Map<string, number>();
    bundle.vocab.forEach((tok, i) => vocabIndex.set(tok, i));
    this.contentIds = bundle.paths.map((p) => p.tokens.map((t) => vocabIndex.get(t) ?? null));
    this.targets = new Int32Array(bundle.paths.length).fill(-1);
    this.idToIndex = new Map();
    bundle.paths.forEach((p, i) => {
      this.idToIndex.set(p.id, i);
      if (p.label !== undefined) this.targets[i] = this.classes.indexOf(p.label);
    });
  }

  /** Train-set path indices with their oversample multiplicities. */
  trainPlan(): { idx: number; mult: number }[] {
    const split = this.bundle.split;
    if (!split) throw new Error("bundle has no split record; cannot train");
    return split.train_ids.map((id) => {
      const idx = this.idToIndex.get(id);
      if (idx === undefined) throw new Error(`split names unknown path ${id}`);
      if (this.targets[idx] < 0) throw new Error(`training path ${id} has no label`);
      return { idx, mult: split.oversample_counts[id] ?? 1 };
    });
  }

  private effectiveWeights(plan: { idx: number; mult: number }[]): Float64Array {
    const counts = new Array(this.classes.length).fill(0);
    for (const { idx, mult } of plan) counts[this.targets[idx]] += mult;
    return classWeights(counts);
  }

  /** One full pass: forward both branches, accumulate every gradient,
   * return the mean loss. Caller decides whether to step. */
  lossAndGrad(plan: { idx: number; mult: number }[], weights: Float64Array, training: boolean): number {
    const { lambda, auxWeight } = this.cfg;
    const { x2, cache: gcnCache } = this.gcn.forward(this.s, training, this.rng);
    const dX2 = new Mat(x2.rows, x2.cols);
    const total = plan.reduce((a, b) => a + b.mult, 0);
    let loss = 0;
    for (const { idx, mult } of plan) {
      const t = this.targets[idx];
      const coeff = mult / total;
      const enc = this.encoder.forward(this.contentIds[idx]);
      const graphLogits = x2.row(idx).slice();
      const fused = fuseLogits(enc.logits, graphLogits, lambda);
      loss += coeff * weightedCrossEntropy(fused, t, weights);
      loss += coeff * auxWeight * weightedCrossEntropy(enc.logits, t, weights);

      const dFused = weightedCrossEntropyGrad(fused, t, weights);
      const dSeq = weightedCrossEntropyGrad(enc.logits, t, weights);
      for (let c = 0; c < dFused.length; c++) {
        dSeq[c] = coeff * (lambda * dFused[c] + auxWeight * dSeq[c]);
        dX2.set(idx, c, dX2.get(idx, c) + coeff * (1 - lambda) * dFused[c]);
      }
      this.encoder.backward(dSeq, enc.cache);
    }
    this.gcn.backward(dX2, this.s, gcnCache);
    return loss;
  }

  train(epochs: number, onEpoch?: (epoch: number, loss: number, acc: number) => void): void {
    const plan = this.trainPlan();
    const weights = this.effectiveWeights(plan);
    for (let e = 0; e < epochs; e++) {
      this.set.zeroGrads();
      const loss = this.lossAndGrad(plan, weights, true);
      this.set.adamStep(this.cfg.lr);
      if (onEpoch) {
        onEpoch(e, loss, this.accuracy(plan.map((p) => p.idx)));
      }
    }
  }

  /** Fused prediction per path index, dropout off. */
  predict(indices: number[]): { pred: number; probs: Float64Array }[] {
    const { x2 } = this.gcn.forward(this.s, false, this.rng);
    return indices.map((idx) => {
      const enc = this.encoder.forward(this.contentIds[idx]);
      const fused = fuseLogits(enc.logits, x2.row(idx).slice(), this.cfg.lambda);
      const probs = softmax(fused);
      return { pred: argmax(probs), probs };
    });
  }

  accuracy(indices: number[]): number {
    const labeled = indices.filter((i) => this.targets[i] >= 0);
    if (labeled.length === 0) return 0;
    const preds = this.predict(labeled);
    let hit = 0;
    preds.forEach((p, k) => {
      if (p.pred === this.targets[labeled[k]]) hit += 1;
    });
    return hit / labeled.length;
  }

  verdicts(): Verdict[] {
    const all = this.bundle.paths.map((_, i) => i);
    const preds = this.predict(all);
    return this.bundle.paths.map((p: PathRecord, i) => {
      const v: Verdict = {
        id: p.id,
        entry: p.entry,
        predicted: this.classes[preds[i].pred],
        probability: preds[i].probs[preds[i].pred],
      };
      if (p.label !== undefined) v.label = p.label;
      return v;
    });
  }
}

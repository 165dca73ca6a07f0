/** Graph branch: a two-layer graph convolution over the path-opcode
 * graph with identity input features, so the first projection is just
 * a learned row per node. One forward covers the whole graph; per-path
 * logits are the path-node rows of the output.
 */

import { Mat, matmul, matmulTA, matmulTB, addRow } from "./mat";
import { Param, ParamSet } from "./params";
import { Rng } from "./rng";

export interface GcnConfig {
  nNodes: number;
  hidden: number;
  nClasses: number;
  dropout: number;
}

export const GCN_HIDDEN = 200;
export const GCN_DROPOUT = 0.5;

export interface GcnCache {
  pre1: Mat; // before relu
  x1: Mat; // after relu and dropout
  mask: Float64Array | null;
}

export class Gcn {
  cfg: GcnConfig;
  w1: Param;
  b1: Param;
  w2: Param;
  b2: Param;

  constructor(cfg: GcnConfig, set: ParamSet, rng: Rng) {
    this.cfg = cfg;
    const scale = 0.2;
    this.w1 = set.add("gcn.w1", Mat.randn(cfg.nNodes, cfg.hidden, scale, rng));
    this.b1 = set.add("gcn.b1", new Mat(1, cfg.hidden));
    this.w2 = set.add("gcn.w2", Mat.randn(cfg.hidden, cfg.nClasses, scale, rng));
    this.b2 = set.add("gcn.b2", new Mat(1, cfg.nClasses));
  }

  /** s is the normalized adjacency; with identity features the first
   * layer is pre1 = s @ w1 + b1. */
  forward(s: Mat, training: boolean, rng: Rng): { x2: Mat; cache: GcnCache } {
    const pre1 = addRow(matmul(s, this.w1.data), this.b1.data.data);
    const x1 = pre1.copy();
    for (let k = 0; k < x1.data.length; k++) if (x1.data[k] < 0) x1.data[k] = 0;
    let mask: Float64Array | null = null;
    if (training && this.cfg.dropout > 0) {
      const keep = 1 - this.cfg.dropout;
      mask = new Float64Array(x1.data.length);
      for (let k = 0; k < mask.length; k++) {
        mask[k] = rng() < keep ? 1 / keep : 0;
        x1.data[k] *= mask[k];
      }
    }
    const x2 = addRow(matmul(s, matmul(x1, this.w2.data)), this.b2.data.data);
    return { x2, cache: { pre1, x1, mask } };
  }

  backward(dX2: Mat, s: Mat, cache: GcnCache): void {
    for (let i = 0; i < dX2.rows; i++) {
      for (let j = 0; j < dX2.cols; j++) {
        this.b2.grad.data[j] += dX2.get(i, j);
      }
    }
    const dH = matmulTA(s, dX2); // H = x1 @ w2
    addInto(this.w2.grad, matmulTA(cache.x1, dH));
    const dX1 = matmulTB(dH, this.w2.data);
    for (let k = 0; k < dX1.data.length; k++) {
      if (cache.mask) dX1.data[k] *= cache.mask[k];
      if (cache.pre1.data[k] <= 0) dX1.data[k] = 0;
    }
    for (let i = 0; i < dX1.rows; i++) {
      for (let j = 0; j < dX1.cols; j++) {
        this.b1.grad.data[j] += dX1.get(i, j);
      }
    }
    addInto(this.w1.grad, matmulTA(s, dX1));
  }
}

function addInto(acc: Mat, g: Mat): void {
  for (let k = 0; k < acc.data.length; k++) acc.data[k] += g.data[k];
}

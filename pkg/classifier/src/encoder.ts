/** Sequence branch: a small pre-norm transformer encoder over path
 * tokens, pooled at the leading marker position, with a linear head.
 *
 * Everything is explicit float64 math with hand-written backward
 * passes; forward() returns the cache backward() consumes. Sequences
 * are processed one at a time, so no padding or attention mask is
 * needed - attention always spans the true length.
 */

import {
  Mat,
  matmul,
  matmulTA,
  matmulTB,
  addRow,
  softmaxRows,
  softmaxRowsBackward,
  layerNorm,
  layerNormBackward,
  LayerNormCache,
} from "./mat";
import { Param, ParamSet } from "./params";
import { Rng } from "./rng";

export const PAD_ID = 0;
export const UNK_ID = 1;
export const CLS_ID = 2;
export const SEP_ID = 3;
export const SPECIAL_COUNT = 4;

export const TYPE_PAD = 0;
export const TYPE_MARKER = 1;
export const TYPE_CONTENT = 2;

export interface EncoderConfig {
  vocabSize: number; // content tokens, before the special-id offset
  nClasses: number;
  dModel: number;
  nHeads: number;
  dFF: number;
  nLayers: number;
  maxLen: number;
}

export const DEFAULT_ENCODER: Omit<EncoderConfig, "vocabSize" | "nClasses"> = {
  dModel: 32,
  nHeads: 2,
  dFF: 64,
  nLayers: 4,
  maxLen: 64,
};

interface LayerParams {
  g1: Param;
  b1: Param;
  wq: Param;
  bq: Param;
  wk: Param;
  bk: Param;
  wv: Param;
  bv: Param;
  wo: Param;
  bo: Param;
  g2: Param;
  b2: Param;
  wf1: Param;
  bf1: Param;
  wf2: Param;
  bf2: Param;
}

interface AttnCache {
  x1: Mat;
  ln: LayerNormCache;
  q: Mat;
  k: Mat;
  v: Mat;
  probs: Mat[];
  concat: Mat;
}

interface LayerCache {
  attnIn: Mat;
  attn: AttnCache;
  ffIn: Mat;
  x2: Mat;
  ln2: LayerNormCache;
  hidden: Mat; // post-relu
}

export interface EncoderCache {
  ids: number[];
  typeIds: number[];
  layers: LayerCache[];
  lnF: LayerNormCache;
  pooled: Float64Array;
}

function sliceCols(m: Mat, c0: number, c1: number): Mat {
  const w = c1 - c0;
  const out = new Mat(m.rows, w);
  for (let i = 0; i < m.rows; i++) {
    for (let j = 0; j < w; j++) out.set(i, j, m.get(i, c0 + j));
  }
  return out;
}

function addIntoCols(dst: Mat, src: Mat, c0: number): void {
  for (let i = 0; i < src.rows; i++) {
    for (let j = 0; j < src.cols; j++) {
      dst.set(i, c0 + j, dst.get(i, c0 + j) + src.get(i, j));
    }
  }
}

function colSumsInto(acc: Mat, m: Mat): void {
  for (let i = 0; i < m.rows; i++) {
    for (let j = 0; j < m.cols; j++) acc.data[j] += m.get(i, j);
  }
}

export class Encoder {
  cfg: EncoderConfig;
  tokEmb: Param;
  typeEmb: Param;
  posEmb: Param;
  layers: LayerParams[] = [];
  gF: Param;
  bF: Param;
  wHead: Param;
  bHead: Param;

  constructor(cfg: EncoderConfig, set: ParamSet, rng: Rng) {
    this.cfg = cfg;
    const d = cfg.dModel;
    const scale = 0.2;
    this.tokEmb = set.add("enc.tok", Mat.randn(cfg.vocabSize + SPECIAL_COUNT, d, scale, rng));
    this.typeEmb = set.add("enc.type", Mat.randn(3, d, scale, rng));
    this.posEmb = set.add("enc.pos", Mat.randn(cfg.maxLen, d, scale, rng));
    for (let l = 0; l < cfg.nLayers; l++) {
      const ones = new Mat(1, d).fill(1);
      const lp: LayerParams = {
        g1: set.add(`enc.${l}.g1`, ones.copy()),
        b1: set.add(`enc.${l}.b1`, new Mat(1, d)),
        wq: set.add(`enc.${l}.wq`, Mat.randn(d, d, scale, rng)),
        bq: set.add(`enc.${l}.bq`, new Mat(1, d)),
        wk: set.add(`enc.${l}.wk`, Mat.randn(d, d, scale, rng)),
        bk: set.add(`enc.${l}.bk`, new Mat(1, d)),
        wv: set.add(`enc.${l}.wv`, Mat.randn(d, d, scale, rng)),
        bv: set.add(`enc.${l}.bv`, new Mat(1, d)),
        wo: set.add(`enc.${l}.wo`, Mat.randn(d, d, scale, rng)),
        bo: set.add(`enc.${l}.bo`, new Mat(1, d)),
        g2: set.add(`enc.${l}.g2`, ones.copy()),
        b2: set.add(`enc.${l}.b2`, new Mat(1, d)),
        wf1: set.add(`enc.${l}.wf1`, Mat.randn(d, cfg.dFF, scale, rng)),
        bf1: set.add(`enc.${l}.bf1`, new Mat(1, cfg.dFF)),
        wf2: set.add(`enc.${l}.wf2`, Mat.randn(cfg.dFF, d, scale, rng)),
        bf2: set.add(`enc.${l}.bf2`, new Mat(1, d)),
      };
      this.layers.push(lp);
    }
    this.gF = set.add("enc.gF", new Mat(1, d).fill(1));
    this.bF = set.add("enc.bF", new Mat(1, d));
    this.wHead = set.add("enc.wHead", Mat.randn(d, cfg.nClasses, scale, rng));
    this.bHead = set.add("enc.bHead", new Mat(1, cfg.nClasses));
  }

  /** Wrap content ids with the leading/trailing markers and truncate.
   * null means out-of-vocabulary and maps to the reserved unknown id. */
  encodeIds(contentIds: (number | null)[]): { ids: number[]; typeIds: number[] } {
    const body = contentIds.slice(0, this.cfg.maxLen - 2);
    const ids = [CLS_ID, ...body.map((c) => (c === null ? UNK_ID : c + SPECIAL_COUNT)), SEP_ID];
    const typeIds = [TYPE_MARKER, ...body.map(() => TYPE_CONTENT), TYPE_MARKER];
    return { ids, typeIds };
  }

  forward(contentIds: (number | null)[]): { logits: Float64Array; cache: EncoderCache } {
    const { ids, typeIds } = this.encodeIds(contentIds);
    const d = this.cfg.dModel;
    const T = ids.length;
    let x = new Mat(T, d);
    for (let t = 0; t < T; t++) {
      const te = this.tokEmb.data.row(ids[t]);
      const ye = this.typeEmb.data.row(typeIds[t]);
      const pe = this.posEmb.data.row(t);
      const off = t * d;
      for (let j = 0; j < d; j++) x.data[off + j] = te[j] + ye[j] + pe[j];
    }

    const layerCaches: LayerCache[] = [];
    for (const lp of this.layers) {
      const attnIn = x;
      const { out: x1, cache: ln } = layerNorm(attnIn, lp.g1.data.data, lp.b1.data.data);
      const q = addRow(matmul(x1, lp.wq.data), lp.bq.data.data);
      const k = addRow(matmul(x1, lp.wk.data), lp.bk.data.data);
      const v = addRow(matmul(x1, lp.wv.data), lp.bv.data.data);

      const dk = d / this.cfg.nHeads;
      const invSqrt = 1 / Math.sqrt(dk);
      const concat = new Mat(T, d);
      const probs: Mat[] = [];
      for (let h = 0; h < this.cfg.nHeads; h++) {
        const qh = sliceCols(q, h * dk, (h + 1) * dk);
        const kh = sliceCols(k, h * dk, (h + 1) * dk);
        const vh = sliceCols(v, h * dk, (h + 1) * dk);
        const scores = matmulTB(qh, kh);
        for (let z = 0; z < scores.data.length; z++) scores.data[z] *= invSqrt;
        const p = softmaxRows(scores);
        probs.push(p);
        addIntoCols(concat, matmul(p, vh), h * dk);
      }
      const attnOut = addRow(matmul(concat, lp.wo.data), lp.bo.data.data);
      const res1 = attnIn.copy();
      for (let z = 0; z < res1.data.length; z++) res1.data[z] += attnOut.data[z];

      const ffIn = res1;
      const { out: x2, cache: ln2 } = layerNorm(ffIn, lp.g2.data.data, lp.b2.data.data);
      const hiddenPre = addRow(matmul(x2, lp.wf1.data), lp.bf1.data.data);
      const hidden = hiddenPre;
      for (let z = 0; z < hidden.data.length; z++) if (hidden.data[z] < 0) hidden.data[z] = 0;
      const ffOut = addRow(matmul(hidden, lp.wf2.data), lp.bf2.data.data);
      const res2 = ffIn.copy();
      for (let z = 0; z < res2.data.length; z++) res2.data[z] += ffOut.data[z];

      layerCaches.push({ attnIn, attn: { x1, ln, q, k, v, probs, concat }, ffIn, x2, ln2, hidden });
      x = res2;
    }

    const { out: xF, cache: lnF } = layerNorm(x, this.gF.data.data, this.bF.data.data);
    const pooled = xF.row(0).slice();
    const logits = new Float64Array(this.cfg.nClasses);
    for (let c = 0; c < this.cfg.nClasses; c++) {
      let s = this.bHead.data.data[c];
      for (let j = 0; j < d; j++) s += pooled[j] * this.wHead.data.get(j, c);
      logits[c] = s;
    }
    return { logits, cache: { ids, typeIds, layers: layerCaches, lnF, pooled } };
  }

  backward(dLogits: Float64Array, cache: EncoderCache): void {
    const d = this.cfg.dModel;
    const T = cache.ids.length;
    const C = this.cfg.nClasses;

    const dPooled = new Float64Array(d);
    for (let c = 0; c < C; c++) {
      const g = dLogits[c];
      this.bHead.grad.data[c] += g;
      for (let j = 0; j < d; j++) {
        this.wHead.grad.set(j, c, this.wHead.grad.get(j, c) + cache.pooled[j] * g);
        dPooled[j] += this.wHead.data.get(j, c) * g;
      }
    }

    const dXF = new Mat(T, d);
    for (let j = 0; j < d; j++) dXF.set(0, j, dPooled[j]);
    let dX = layerNormBackward(dXF, cache.lnF, this.gF.data.data, this.gF.grad.data, this.bF.grad.data);

    for (let l = this.layers.length - 1; l >= 0; l--) {
      const lp = this.layers[l];
      const lc = cache.layers[l];

      // feed-forward block: res2 = ffIn + W2 relu(W1 x2 + b1) + b2
      const dRes2 = dX;
      const dFFOut = dRes2;
      colSumsInto(lp.bf2.grad, dFFOut);
      addGrad(lp.wf2.grad, matmulTA(lc.hidden, dFFOut));
      const dHidden = matmulTB(dFFOut, lp.wf2.data);
      for (let z = 0; z < dHidden.data.length; z++) {
        if (lc.hidden.data[z] <= 0) dHidden.data[z] = 0;
      }
      colSumsInto(lp.bf1.grad, dHidden);
      addGrad(lp.wf1.grad, matmulTA(lc.x2, dHidden));
      const dX2 = matmulTB(dHidden, lp.wf1.data);
      const dFFIn = layerNormBackward(dX2, lc.ln2, lp.g2.data.data, lp.g2.grad.data, lp.b2.grad.data);
      for (let z = 0; z < dFFIn.data.length; z++) dFFIn.data[z] += dRes2.data[z];

      // attention block: res1 = attnIn + Wo concat(heads) + bo
      const dRes1 = dFFIn;
      const dAttnOut = dRes1;
      colSumsInto(lp.bo.grad, dAttnOut);
      addGrad(lp.wo.grad, matmulTA(lc.attn.concat, dAttnOut));
      const dConcat = matmulTB(dAttnOut, lp.wo.data);

      const dk = d / this.cfg.nHeads;
      const invSqrt = 1 / Math.sqrt(dk);
      const dq = new Mat(T, d);
      const dkM = new Mat(T, d);
      const dv = new Mat(T, d);
      for (let h = 0; h < this.cfg.nHeads; h++) {
        const dOh = sliceCols(dConcat, h * dk, (h + 1) * dk);
        const qh = sliceCols(lc.attn.q, h * dk, (h + 1) * dk);
        const kh = sliceCols(lc.attn.k, h * dk, (h + 1) * dk);
        const vh = sliceCols(lc.attn.v, h * dk, (h + 1) * dk);
        const p = lc.attn.probs[h];
        const dP = matmulTB(dOh, vh);
        const dVh = matmulTA(p, dOh);
        const dScores = softmaxRowsBackward(p, dP);
        for (let z = 0; z < dScores.data.length; z++) dScores.data[z] *= invSqrt;
        const dQh = matmul(dScores, kh);
        const dKh = matmulTA(dScores, qh);
        addIntoCols(dq, dQh, h * dk);
        addIntoCols(dkM, dKh, h * dk);
        addIntoCols(dv, dVh, h * dk);
      }

      colSumsInto(lp.bq.grad, dq);
      colSumsInto(lp.bk.grad, dkM);
      colSumsInto(lp.bv.grad, dv);
      addGrad(lp.wq.grad, matmulTA(lc.attn.x1, dq));
      addGrad(lp.wk.grad, matmulTA(lc.attn.x1, dkM));
      addGrad(lp.wv.grad, matmulTA(lc.attn.x1, dv));
      const dX1 = matmulTB(dq, lp.wq.data);
      addGrad(dX1, matmulTB(dkM, lp.wk.data));
      addGrad(dX1, matmulTB(dv, lp.wv.data));
      const dAttnIn = layerNormBackward(dX1, lc.attn.ln, lp.g1.data.data, lp.g1.grad.data, lp.b1.grad.data);
      for (let z = 0; z < dAttnIn.data.length; z++) dAttnIn.data[z] += dRes1.data[z];
      dX = dAttnIn;
    }

    // scatter into the three embedding tables
    for (let t = 0; t < T; t++) {
      const off = t * d;
      const tokRow = cache.ids[t] * d;
      const typeRow = cache.typeIds[t] * d;
      const posRow = t * d;
      for (let j = 0; j < d; j++) {
        const g = dX.data[off + j];
        this.tokEmb.grad.data[tokRow + j] += g;
        this.typeEmb.grad.data[typeRow + j] += g;
        this.posEmb.grad.data[posRow + j] += g;
      }
    }
  }
}

function addGrad(acc: Mat, g: Mat): void {
  for (let k = 0; k < acc.data.length; k++) acc.data[k] += g.data[k];
}

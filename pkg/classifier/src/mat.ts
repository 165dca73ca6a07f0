/** Row-major float64 matrices and the handful of ops the model needs.
 * Nothing here allocates during a hot loop unless the shape demands it. */

import { Rng, gaussian } from "./rng";

export class Mat {
  rows: number;
  cols: number;
  data: Float64Array;

  constructor(rows: number, cols: number, data?: Float64Array) {
    this.rows = rows;
    this.cols = cols;
    this.data = data ?? new Float64Array(rows * cols);
    if (this.data.length !== rows * cols) {
      throw new Error(`shape ${rows}x${cols} wants ${rows * cols} values, got ${this.data.length}`);
    }
  }

  get(i: number, j: number): number {
    return this.data[i * this.cols + j];
  }

  set(i: number, j: number, v: number): void {
    this.data[i * this.cols + j] = v;
  }

  row(i: number): Float64Array {
    return this.data.subarray(i * this.cols, (i + 1) * this.cols);
  }

  copy(): Mat {
    return new Mat(this.rows, this.cols, this.data.slice());
  }

  fill(v: number): Mat {
    this.data.fill(v);
    return this;
  }

  static from(rows: number[][]): Mat {
    const m = new Mat(rows.length, rows[0].length);
    for (let i = 0; i < rows.length; i++) {
      for (let j = 0; j < rows[0].length; j++) m.set(i, j, rows[i][j]);
    }
    return m;
  }

  static eye(n: number): Mat {
    const m = new Mat(n, n);
    for (let i = 0; i < n; i++) m.set(i, i, 1);
    return m;
  }

  static randn(rows: number, cols: number, scale: number, rng: Rng): Mat {
    const m = new Mat(rows, cols);
    for (let k = 0; k < m.data.length; k++) m.data[k] = gaussian(rng) * scale;
    return m;
  }
}

/** c = a @ b */
export function matmul(a: Mat, b: Mat, out?: Mat): Mat {
  if (a.cols !== b.rows) throw new Error(`matmul ${a.rows}x${a.cols} @ ${b.rows}x${b.cols}`);
  const c = out ?? new Mat(a.rows, b.cols);
  c.data.fill(0);
  for (let i = 0; i < a.rows; i++) {
    const arow = i * a.cols;
    const crow = i * c.cols;
    for (let k = 0; k < a.cols; k++) {
      const av = a.data[arow + k];
      if (av === 0) continue;
      const brow = k * b.cols;
      for (let j = 0; j < b.cols; j++) {
        c.data[crow + j] += av * b.data[brow + j];
      }
    }
  }
  return c;
}

/** c = a^T @ b */
export function matmulTA(a: Mat, b: Mat): Mat {
  if (a.rows !== b.rows) throw new Error(`matmulTA ${a.rows}x${a.cols} , ${b.rows}x${b.cols}`);
  const c = new Mat(a.cols, b.cols);
  for (let k = 0; k < a.rows; k++) {
    const arow = k * a.cols;
    const brow = k * b.cols;
    for (let i = 0; i < a.cols; i++) {
      const av = a.data[arow + i];
      if (av === 0) continue;
      const crow = i * c.cols;
      for (let j = 0; j < b.cols; j++) {
        c.data[crow + j] += av * b.data[brow + j];
      }
    }
  }
  return c;
}

/** c = a @ b^T */
export function matmulTB(a: Mat, b: Mat): Mat {
  if (a.cols !== b.cols) throw new Error(`matmulTB ${a.rows}x${a.cols} , ${b.rows}x${b.cols}`);
  const c = new Mat(a.rows, b.rows);
  for (let i = 0; i < a.rows; i++) {
    const arow = i * a.cols;
    for (let j = 0; j < b.rows; j++) {
      const brow = j * b.cols;
      let s = 0;
      for (let k = 0; k < a.cols; k++) s += a.data[arow + k] * b.data[brow + k];
      c.data[i * c.cols + j] = s;
    }
  }
  return c;
}

export function addInPlace(a: Mat, b: Mat): Mat {
  for (let k = 0; k < a.data.length; k++) a.data[k] += b.data[k];
  return a;
}

export function scaleInPlace(a: Mat, s: number): Mat {
  for (let k = 0; k < a.data.length; k++) a.data[k] *= s;
  return a;
}

/** Adds a bias row vector to every row. */
export function addRow(a: Mat, bias: Float64Array): Mat {
  for (let i = 0; i < a.rows; i++) {
    const off = i * a.cols;
    for (let j = 0; j < a.cols; j++) a.data[off + j] += bias[j];
  }
  return a;
}

export function relu(a: Mat): Mat {
  const out = a.copy();
  for (let k = 0; k < out.data.length; k++) if (out.data[k] < 0) out.data[k] = 0;
  return out;
}

/** Stable softmax over each row, in a fresh matrix. */
export function softmaxRows(a: Mat): Mat {
  const out = new Mat(a.rows, a.cols);
  for (let i = 0; i < a.rows; i++) {
    const off = i * a.cols;
    let max = -Infinity;
    for (let j = 0; j < a.cols; j++) max = Math.max(max, a.data[off + j]);
    let sum = 0;
    for (let j = 0; j < a.cols; j++) {
      const e = Math.exp(a.data[off + j] - max);
      out.data[off + j] = e;
      sum += e;
    }
    for (let j = 0; j < a.cols; j++) out.data[off + j] /= sum;
  }
  return out;
}

/** Given P = softmaxRows(X) and dL/dP, returns dL/dX. */
export function softmaxRowsBackward(p: Mat, dp: Mat): Mat {
  const dx = new Mat(p.rows, p.cols);
  for (let i = 0; i < p.rows; i++) {
    const off = i * p.cols;
    let dot = 0;
    for (let j = 0; j < p.cols; j++) dot += dp.data[off + j] * p.data[off + j];
    for (let j = 0; j < p.cols; j++) {
      dx.data[off + j] = p.data[off + j] * (dp.data[off + j] - dot);
    }
  }
  return dx;
}

export interface LayerNormCache {
  normed: Mat;
  invStd: Float64Array;
}

const LN_EPS = 1e-5;

/** Per-row normalization with learned gain/shift. */
export function layerNorm(x: Mat, gamma: Float64Array, beta: Float64Array): { out: Mat; cache: LayerNormCache } {
  const out = new Mat(x.rows, x.cols);
  const normed = new Mat(x.rows, x.cols);
  const invStd = new Float64Array(x.rows);
  const n = x.cols;
  for (let i = 0; i < x.rows; i++) {
    const off = i * n;
    let mean = 0;
    for (let j = 0; j < n; j++) mean += x.data[off + j];
    mean /= n;
    let varSum = 0;
    for (let j = 0; j < n; j++) {
      const d = x.data[off + j] - mean;
      varSum += d * d;
    }
    const inv = 1 / Math.sqrt(varSum / n + LN_EPS);
    invStd[i] = inv;
    for (let j = 0; j < n; j++) {
      const nv = (x.data[off + j] - mean) * inv;
      normed.data[off + j] = nv;
      out.data[off + j] = nv * gamma[j] + beta[j];
    }
  }
  return { out, cache: { normed, invStd } };
}

export function layerNormBackward(
  dOut: Mat,
  cache: LayerNormCache,
  gamma: Float64Array,
  dGamma: Float64Array,
  dBeta: Float64Array
): Mat {
  const { normed, invStd } = cache;
  const dx = new Mat(dOut.rows, dOut.cols);
  const n = dOut.cols;
  for (let i = 0; i < dOut.rows; i++) {
    const off = i * n;
    let sumDn = 0;
    let sumDnN = 0;
    for (let j = 0; j < n; j++) {
      const dn = dOut.data[off + j] * gamma[j];
      sumDn += dn;
      sumDnN += dn * normed.data[off + j];
      dGamma[j] += dOut.data[off + j] * normed.data[off + j];
      dBeta[j] += dOut.data[off + j];
    }
    for (let j = 0; j < n; j++) {
      const dn = dOut.data[off + j] * gamma[j];
      dx.data[off + j] = (invStd[i] / n) * (n * dn - sumDn - normed.data[off + j] * sumDnN);
    }
  }
  return dx;
}

/** Trainable tensors plus Adam state, kept in one registry so the
 * optimizer step and gradient zeroing stay one loop each. */

import { Mat } from "./mat";

export class Param {
  name: string;
  data: Mat;
  grad: Mat;
  m: Mat;
  v: Mat;

  constructor(name: string, data: Mat) {
    this.name = name;
    this.data = data;
    this.grad = new Mat(data.rows, data.cols);
    this.m = new Mat(data.rows, data.cols);
    this.v = new Mat(data.rows, data.cols);
  }
}

export class ParamSet {
  params: Param[] = [];
  private step = 0;

  add(name: string, data: Mat): Param {
    const p = new Param(name, data);
    this.params.push(p);
    return p;
  }

  zeroGrads(): void {
    for (const p of this.params) p.grad.data.fill(0);
  }

  adamStep(lr: number, beta1 = 0.9, beta2 = 0.999, eps = 1e-8): void {
    this.step += 1;
    const b1t = 1 - Math.pow(beta1, this.step);
    const b2t = 1 - Math.pow(beta2, this.step);
    for (const p of this.params) {
      const { data, grad, m, v } = p;
      for (let k = 0; k < data.data.length; k++) {
        const g = grad.data[k];
        m.data[k] = beta1 * m.data[k] + (1 - beta1) * g;
        v.data[k] = beta2 * v.data[k] + (1 - beta2) * g * g;
        data.data[k] -= (lr * (m.data[k] / b1t)) / (Math.sqrt(v.data[k] / b2t) + eps);
      }
    }
  }
}

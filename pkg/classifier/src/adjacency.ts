/** Dense symmetric normalization of the bundle's adjacency triples.
 *
 * The triples carry the upper triangle (i <= j) with the unit diagonal
 * already present, so mirroring them yields A-with-self-loops directly.
 * The propagation matrix is S = D^{-1/2} A D^{-1/2}.
 */

import { Mat } from "./mat";
import { GraphTriple } from "./bundle";

export function denseAdjacency(n: number, triples: GraphTriple[]): Mat {
  const a = new Mat(n, n);
  for (const { i, j, w } of triples) {
    if (i < 0 || j < 0 || i >= n || j >= n) {
      throw new Error(`triple (${i},${j}) out of range for ${n} nodes`);
    }
    a.set(i, j, w);
    a.set(j, i, w);
  }
  return a;
}

export function normalizeAdjacency(a: Mat): Mat {
  const n = a.rows;
  const dinv = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    let deg = 0;
    for (let j = 0; j < n; j++) deg += a.get(i, j);
    dinv[i] = deg > 0 ? 1 / Math.sqrt(deg) : 0;
  }
  const s = new Mat(n, n);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      s.set(i, j, dinv[i] * a.get(i, j) * dinv[j]);
    }
  }
  return s;
}

export function propagationMatrix(n: number, triples: GraphTriple[]): Mat {
  return normalizeAdjacency(denseAdjacency(n, triples));
}

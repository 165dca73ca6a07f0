/** Numeric gradient check: every parameter tensor's analytic gradient
 * is compared against central differences on a down-sized model with
 * dropout disabled. */

import { describe, it, expect } from "vitest";
import { Bundle } from "../src/bundle";
import { Model, DEFAULT_MODEL } from "../src/model";
import { mulberry32 } from "../src/rng";

function tinyBundle(): Bundle {
  const vocab = ["CALLVALUE", "ISZERO", "DELEGATECALL", "GAS"];
  const paths = [
    { id: "0".repeat(32), entry: "fallback", tokens: ["CALLVALUE", "ISZERO", "CALLVALUE"], label: "negative" },
    { id: "1".padStart(32, "0"), entry: "fallback", tokens: ["ISZERO", "ISZERO"], label: "negative" },
    { id: "2".padStart(32, "0"), entry: "SEL_aa", tokens: ["DELEGATECALL", "GAS"], label: "flash_loan" },
    { id: "3".padStart(32, "0"), entry: "SEL_bb", tokens: ["GAS", "DELEGATECALL", "GAS"], label: "flash_loan" },
  ];
  const n = paths.length + vocab.length;
  const triples = [];
  for (let i = 0; i < n; i++) triples.push({ i, j: i, w: 1 });
  triples.push({ i: 0, j: 4, w: 0.8 });
  triples.push({ i: 0, j: 5, w: 0.4 });
  triples.push({ i: 1, j: 5, w: 1.2 });
  triples.push({ i: 2, j: 6, w: 0.9 });
  triples.push({ i: 2, j: 7, w: 0.3 });
  triples.push({ i: 3, j: 6, w: 0.5 });
  triples.push({ i: 3, j: 7, w: 1.1 });
  return {
    paths,
    header: { format_version: 1, n_path: 4, n_opcode: 4, log_base: "e", window: 3 },
    triples,
    vocab,
    split: {
      train_ids: paths.map((p) => p.id),
      test_ids: [],
      seed: 0,
      oversample_counts: { [paths[1].id]: 2 },
    },
  };
}

describe("analytic gradients", () => {
  it("agree with central differences across every tensor", () => {
    const model = new Model(tinyBundle(), {
      ...DEFAULT_MODEL,
      dropout: 0, // dropout off: the loss must be deterministic here
      seed: 5,
      encoder: { dModel: 8, nHeads: 2, dFF: 12, nLayers: 2, maxLen: 12 },
      hidden: 10,
    });
    const plan = model.trainPlan();
    const weights = new Float64Array(model.classes.length).fill(1);
    weights[0] = 1.5; // exercise the weighted path too

    model.set.zeroGrads();
    model.lossAndGrad(plan, weights, false);
    const analytic = model.set.params.map((p) => p.grad.data.slice());

    const pick = mulberry32(123);
    const h = 1e-5;
    const lossAt = () => {
      model.set.zeroGrads();
      return model.lossAndGrad(plan, weights, false);
    };

    let checked = 0;
    model.set.params.forEach((param, pi) => {
      const size = param.data.data.length;
      const count = Math.min(3, size);
      const seen = new Set<number>();
      while (seen.size < count) seen.add(Math.floor(pick() * size));
      for (const k of seen) {
        const keep = param.data.data[k];
        param.data.data[k] = keep + h;
        const up = lossAt();
        param.data.data[k] = keep - h;
        const down = lossAt();
        param.data.data[k] = keep;
        const numeric = (up - down) / (2 * h);
        const exact = analytic[pi][k];
        const denom = Math.max(1e-8, Math.abs(numeric) + Math.abs(exact));
        const rel = Math.abs(numeric - exact) / denom;
        if (Math.abs(numeric) < 1e-10 && Math.abs(exact) < 1e-10) continue;
        expect(rel, `${param.name}[${k}] numeric=${numeric} exact=${exact}`).toBeLessThanOrEqual(1e-4);
        checked += 1;
      }
    });
    expect(checked).toBeGreaterThan(50);
  }, 120000);
});

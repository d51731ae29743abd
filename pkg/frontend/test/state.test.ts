import { describe, expect, it } from "vitest";

import {
  applyAllPreset,
  applyIsolatePreset,
  applyPairwisePreset,
  clampState,
  defaultState,
  rollSeed,
  toSampleRequest,
  type PanelState,
} from "../src/state.js";
import type { Meta } from "../src/types.js";

const META: Meta = {
  version: "0.1.0",
  n_rewards: 4,
  bins: 8,
  conditions: 8,
  mode: "multi",
  checkpoint_digest: "abc123",
  rewards: [0, 1, 2, 3].map((id) => ({
    id,
    name: `r${id}`,
    description: "",
    range_hint: [-2, 0],
  })),
  defaults: { omega: 2, steps: 50, count: 1, max_count: 1024, max_steps: 500 },
};

describe("defaultState", () => {
  it("starts at the max-everything guidance with a locked seed", () => {
    const s = defaultState(META);
    expect(s.sPlus).toEqual([1, 1, 1, 1]);
    expect(s.sMinus).toEqual([0, 0, 0, 0]);
    expect(s.omega).toBe(2);
    expect(s.seedLocked).toBe(true);
  });
});

describe("presets", () => {
  it("isolate r2 sets the negative target to [1,1,0,1]", () => {
    const s = applyIsolatePreset(defaultState(META), 2);
    expect(s.sMinus).toEqual([1, 1, 0, 1]);
    expect(s.sPlus).toEqual([1, 1, 1, 1]);
  });

  it("isolate preset state issues a valid request as-is", () => {
    const s = applyIsolatePreset(defaultState(META), 2);
    const req = toSampleRequest(s, META);
    expect(req.s_minus).toEqual([1, 1, 0, 1]);
    expect(req.s_plus).toEqual([1, 1, 1, 1]);
  });

  it("all preset zeroes the negative target", () => {
    const s = applyAllPreset(applyIsolatePreset(defaultState(META), 1));
    expect(s.sMinus).toEqual([0, 0, 0, 0]);
  });

  it("pairwise r0/r3 interpolates the negative target", () => {
    const s = applyPairwisePreset(defaultState(META), 0, 3, 0.25);
    expect(s.sMinus).toEqual([0.25, 1, 1, 0.75]);
    expect(applyPairwisePreset(defaultState(META), 0, 3, 0).sMinus)
      .toEqual([0, 1, 1, 1]);
    expect(applyPairwisePreset(defaultState(META), 0, 3, 1).sMinus)
      .toEqual([1, 1, 1, 0]);
  });

  it("rejects bad preset arguments", () => {
    expect(() => applyIsolatePreset(defaultState(META), 4)).toThrow();
    expect(() => applyPairwisePreset(defaultState(META), 1, 1, 0.5)).toThrow();
    expect(() => applyPairwisePreset(defaultState(META), 0, 3, 1.5)).toThrow();
  });
});

describe("clampState + toSampleRequest", () => {
  it("maps any reachable slider state to a valid request", () => {
    // deterministic fuzz over wild states: clamp must always produce a
    // state that converts without throwing
    let x = 1234567;
    const rand = () => {
      x = (x * 1103515245 + 12345) % 2147483648;
      return x / 2147483648;
    };
    for (let i = 0; i < 500; i++) {
      const wild: PanelState = {
        ...defaultState(META),
        sPlus: [rand() * 3 - 1, rand(), rand(), rand() * 2],
        sMinus: [rand(), rand() * -2, rand(), rand()],
        omega: rand() * 20 - 5,
        condition: Math.floor(rand() * 30 - 10),
        count: Math.floor(rand() * 5000),
        bestOfN: Math.floor(rand() * 5000),
        bestOfSelector: Math.floor(rand() * 10),
        bestOfEnabled: rand() > 0.5,
      };
      const clamped = clampState(wild, META);
      const req = toSampleRequest(clamped, META);
      expect(req.s_plus.every((v) => v >= 0 && v <= 1)).toBe(true);
      expect(req.s_minus.every((v) => v >= 0 && v <= 1)).toBe(true);
      expect(req.omega).toBeGreaterThanOrEqual(0);
      expect(req.count).toBeGreaterThanOrEqual(1);
      expect(req.count).toBeLessThanOrEqual(1024);
      expect(req.condition).toBeGreaterThanOrEqual(0);
      expect(req.condition).toBeLessThan(8);
    }
  });

  it("quantizes sliders to the 0.005 step", () => {
    const s = clampState({ ...defaultState(META), sPlus: [0.1234, 1, 1, 1] }, META);
    expect(s.sPlus[0]).toBeCloseTo(0.125, 10);
  });

  it("request carries the meta default steps", () => {
    const req = toSampleRequest(defaultState(META), META);
    expect(req.steps).toBe(50);
    expect(req.best_of).toBeNull();
  });

  it("best-of toggle populates the request", () => {
    const s = { ...defaultState(META), bestOfEnabled: true, bestOfN: 16, bestOfSelector: 2 };
    expect(toSampleRequest(s, META).best_of).toEqual({ n: 16, selector: 2 });
  });

  it("rejects states that disagree with meta", () => {
    const s = { ...defaultState(META), sPlus: [1, 1, 1] };
    expect(() => toSampleRequest(s as PanelState, META)).toThrow();
  });
});

describe("rollSeed", () => {
  it("keeps a locked seed fixed and advances an unlocked one", () => {
    const locked = defaultState(META);
    expect(rollSeed(locked).seed).toBe(locked.seed);
    const unlocked = { ...locked, seedLocked: false };
    expect(rollSeed(unlocked).seed).toBe(locked.seed + 1);
  });
});

import { describe, expect, it } from "vitest";

import { HISTORY_CAP, HistoryStore } from "../src/history.js";
import type { RewardStats, SampleRequest } from "../src/types.js";

function makeEntry(seed: number): { request: SampleRequest; stats: RewardStats } {
  return {
    request: {
      condition: seed % 8,
      s_plus: [1, 1, 1, 1],
      s_minus: [0, 0, 0, 0],
      omega: 2,
      count: 64,
      seed,
      steps: 50,
      best_of: null,
    },
    stats: {
      mean: [-0.1 * seed, 0.5, -0.2, -0.3],
      std: [0.1, 0.1, 0.1, 0.1],
      min: [-1, -1, -1, -1],
      max: [0, 1, 0, 0],
      count: 64,
    },
  };
}

describe("HistoryStore", () => {
  it("caps at 50 entries, evicting the oldest", () => {
    const store = new HistoryStore();
    for (let i = 0; i < 60; i++) store.push(makeEntry(i));
    expect(store.length).toBe(HISTORY_CAP);
    expect(store.get(0).request.seed).toBe(10);
    expect(store.get(49).request.seed).toBe(59);
  });

  it("restores the exact request including targets", () => {
    const store = new HistoryStore();
    const entry = makeEntry(7);
    store.push(entry);
    const restored = store.get(0);
    expect(restored.request).toEqual(entry.request);
    expect(restored.request).not.toBe(entry.request); // defensive copy
  });

  it("displayed means are the response values verbatim", () => {
    const store = new HistoryStore();
    const entry = makeEntry(3);
    store.push(entry);
    expect(store.get(0).stats.mean).toEqual(entry.stats.mean);
  });

  it("CSV columns use the experiment-report naming", () => {
    const store = new HistoryStore();
    store.push(makeEntry(1));
    store.push(makeEntry(2));
    const lines = store.toCsv().trimEnd().split("\n");
    expect(lines).toHaveLength(3);
    const header = lines[0]!.split(",");
    expect(header).toContain("mean_r0");
    expect(header).toContain("mean_r3");
    expect(header.indexOf("mean_r1")).toBe(header.indexOf("mean_r0") + 1);
    const row = lines[1]!.split(",");
    expect(row).toHaveLength(header.length);
    expect(Number(row[header.indexOf("mean_r0")])).toBeCloseTo(-0.1);
  });

  it("clear empties the store", () => {
    const store = new HistoryStore();
    store.push(makeEntry(1));
    store.clear();
    expect(store.length).toBe(0);
  });
});

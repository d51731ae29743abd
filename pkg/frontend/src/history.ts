// Rolling request history: last 50 completed (request, stats) pairs, oldest
// evicted first. Rows restore exactly and export as CSV with the same
// mean_r{j} column naming the experiment reports use.

import type { SampleRequest, RewardStats } from "./types.js";

export interface HistoryEntry {
  request: SampleRequest;
  stats: RewardStats;
}

export const HISTORY_CAP = 50;

export class HistoryStore {
  private readonly cap: number;
  private items: HistoryEntry[] = [];

  constructor(cap: number = HISTORY_CAP) {
    this.cap = cap;
  }

  push(entry: HistoryEntry): void {
    this.items.push({
      request: { ...entry.request, s_plus: entry.request.s_plus.slice(),
                 s_minus: entry.request.s_minus.slice(),
                 best_of: entry.request.best_of ? { ...entry.request.best_of } : null },
      stats: entry.stats,
    });
    while (this.items.length > this.cap) {
      this.items.shift();
    }
  }

  get length(): number {
    return this.items.length;
  }

  entries(): readonly HistoryEntry[] {
    return this.items;
  }

  get(index: number): HistoryEntry {
    const entry = this.items[index];
    if (!entry) throw new Error(`no history entry at ${index}`);
    return entry;
  }

  clear(): void {
    this.items = [];
  }

  toCsv(): string {
    const n = this.items[0]?.request.s_plus.length ?? 4;
    const header = [
      "condition", "omega", "count", "seed", "steps",
      ...range(n).map((j) => `s_plus_${j}`),
      ...range(n).map((j) => `s_minus_${j}`),
      "best_of_n", "best_of_selector",
      ...range(n).map((j) => `mean_r${j}`),
    ];
    const rows = this.items.map((e) => {
      const r = e.request;
      return [
        r.condition, r.omega, r.count, r.seed, r.steps,
        ...r.s_plus, ...r.s_minus,
        r.best_of?.n ?? "", r.best_of?.selector ?? "",
        ...e.stats.mean,
      ].join(",");
    });
    return [header.join(","), ...rows].join("\n") + "\n";
  }
}

function range(n: number): number[] {
  return Array.from({ length: n }, (_, i) => i);
}

// Panel state and its total mapping onto gateway sample requests. Any
// reachable slider configuration clamps into a valid request, so the send
// path never has to special-case bad combinations.

import type { BestOfSpec, Meta, SampleRequest } from "./types.js";

export const SLIDER_STEP = 0.005;
export const OMEGA_MAX = 8;

export interface PanelState {
  sPlus: number[];
  sMinus: number[];
  omega: number;
  condition: number;
  count: number;
  seed: number;
  seedLocked: boolean;
  bestOfEnabled: boolean;
  bestOfN: number;
  bestOfSelector: number;
  colorBy: number;
  pairwiseT: number;
}

export function defaultState(meta: Meta): PanelState {
  return {
    sPlus: new Array(meta.n_rewards).fill(1),
    sMinus: new Array(meta.n_rewards).fill(0),
    omega: meta.defaults.omega,
    condition: 0,
    count: 256,
    seed: 0,
    // locked by default: reward dials act on a fixed noise draw
    seedLocked: true,
    bestOfEnabled: false,
    bestOfN: 8,
    bestOfSelector: 0,
    colorBy: 0,
    pairwiseT: 0.5,
  };
}

function quantize(value: number, step: number): number {
  return Math.round(value / step) * step;
}

function clamp01(value: number): number {
  return Math.min(1, Math.max(0, quantize(value, SLIDER_STEP)));
}

function clampInt(value: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, Math.round(value)));
}

/** Normalize every field into its legal range; the identity on valid states. */
export function clampState(state: PanelState, meta: Meta): PanelState {
  const n = meta.n_rewards;
  const fit = (xs: number[], fill: number) => {
    const out = xs.slice(0, n).map(clamp01);
    while (out.length < n) out.push(fill);
    return out;
  };
  return {
    ...state,
    sPlus: fit(state.sPlus, 1),
    sMinus: fit(state.sMinus, 0),
    omega: Math.min(OMEGA_MAX, Math.max(0, quantize(state.omega, SLIDER_STEP))),
    condition: clampInt(state.condition, 0, meta.conditions - 1),
    count: clampInt(state.count, 1, meta.defaults.max_count),
    seed: Math.round(state.seed),
    bestOfN: clampInt(state.bestOfN, 1, meta.defaults.max_count),
    bestOfSelector: clampInt(state.bestOfSelector, 0, n - 1),
    colorBy: clampInt(state.colorBy, 0, n - 1),
    pairwiseT: clamp01(state.pairwiseT),
  };
}

/** Build the outgoing request; throws if the state disagrees with meta. */
export function toSampleRequest(state: PanelState, meta: Meta): SampleRequest {
  const n = meta.n_rewards;
  if (state.sPlus.length !== n || state.sMinus.length !== n) {
    throw new Error(`targets must have ${n} components`);
  }
  for (const v of [...state.sPlus, ...state.sMinus]) {
    if (!(v >= 0 && v <= 1)) throw new Error(`target component ${v} outside [0, 1]`);
  }
  if (!(state.omega >= 0)) throw new Error(`omega ${state.omega} must be >= 0`);
  if (state.condition < 0 || state.condition >= meta.conditions) {
    throw new Error(`condition ${state.condition} outside [0, ${meta.conditions})`);
  }
  if (state.count < 1 || state.count > meta.defaults.max_count) {
    throw new Error(`count ${state.count} outside [1, ${meta.defaults.max_count}]`);
  }
  const bestOf: BestOfSpec | null = state.bestOfEnabled
    ? { n: state.bestOfN, selector: state.bestOfSelector }
    : null;
  return {
    condition: state.condition,
    s_plus: state.sPlus.slice(),
    s_minus: state.sMinus.slice(),
    omega: state.omega,
    count: state.count,
    seed: state.seed,
    steps: meta.defaults.steps,
    best_of: bestOf,
  };
}

/** Advance the seed when it is not locked; locked seeds never move. */
export function rollSeed(state: PanelState): PanelState {
  if (state.seedLocked) return state;
  return { ...state, seed: state.seed + 1 };
}

// --- presets ---------------------------------------------------------------

/** Point the guidance purely toward reward j: both targets all ones except
 * the negative target zeroes component j. */
export function applyIsolatePreset(state: PanelState, j: number): PanelState {
  const n = state.sPlus.length;
  if (j < 0 || j >= n) throw new Error(`reward index ${j} outside [0, ${n})`);
  const sMinus = new Array(n).fill(1);
  sMinus[j] = 0;
  return { ...state, sPlus: new Array(n).fill(1), sMinus };
}

/** Guide toward simultaneously high values for every reward. */
export function applyAllPreset(state: PanelState): PanelState {
  const n = state.sPlus.length;
  return { ...state, sPlus: new Array(n).fill(1), sMinus: new Array(n).fill(0) };
}

/** Interpolate the guidance between rewards a and b: s-[a] = t, s-[b] = 1-t,
 * everything else pinned to 1. */
export function applyPairwisePreset(
  state: PanelState, a: number, b: number, t: number,
): PanelState {
  const n = state.sPlus.length;
  if (a === b) throw new Error("pairwise preset needs two distinct rewards");
  if (t < 0 || t > 1) throw new Error(`interpolation position ${t} outside [0, 1]`);
  const sMinus = new Array(n).fill(1);
  sMinus[a] = t;
  sMinus[b] = 1 - t;
  return { ...state, sPlus: new Array(n).fill(1), sMinus, pairwiseT: t };
}

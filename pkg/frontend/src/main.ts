// DOM wiring for the steering panel. All displayed reward numbers come from
// gateway responses; the panel itself never computes scores.

import { GatewayClient, GatewayError, LatestWins } from "./api.js";
import { debounce } from "./debounce.js";
import { HistoryStore } from "./history.js";
import { buildScene, drawScene } from "./scatter.js";
import {
  applyAllPreset,
  applyIsolatePreset,
  applyPairwisePreset,
  clampState,
  defaultState,
  rollSeed,
  toSampleRequest,
  type PanelState,
} from "./state.js";
import type { Meta, SampleRequest, SampleResponse } from "./types.js";

const DEBOUNCE_MS = 150;
const PAIRWISE_A = 0;
const PAIRWISE_B = 3;

const gatewayUrl =
  new URLSearchParams(window.location.search).get("gateway") ?? "http://127.0.0.1:8734";
const client = new GatewayClient(gatewayUrl);
const inflight = new LatestWins();
const history = new HistoryStore();

let meta: Meta;
let state: PanelState;
let lastResponse: SampleResponse | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setStatus(text: string, isError = false): void {
  const status = el<HTMLDivElement>("status");
  status.textContent = text;
  status.className = isError ? "status error" : "status";
}

function sliderRow(
  label: string, id: string, min: number, max: number, step: number, value: number,
): string {
  return `
    <label class="slider-row">
      <span class="slider-label">${label}</span>
      <input type="range" id="${id}" min="${min}" max="${max}" step="${step}"
             value="${value}">
      <span class="slider-value" id="${id}-value">${value}</span>
    </label>`;
}

function buildControls(): void {
  const plus = meta.rewards
    .map((r) => sliderRow(`s+ ${r.name}`, `splus-${r.id}`, 0, 1, 0.005, 1))
    .join("");
  const minus = meta.rewards
    .map((r) => sliderRow(`s- ${r.name}`, `sminus-${r.id}`, 0, 1, 0.005, 0))
    .join("");
  el<HTMLDivElement>("plus-sliders").innerHTML = plus;
  el<HTMLDivElement>("minus-sliders").innerHTML = minus;

  const condition = el<HTMLSelectElement>("condition");
  condition.innerHTML = Array.from({ length: meta.conditions })
    .map((_, c) => `<option value="${c}">condition ${c}</option>`)
    .join("");

  const colorBy = el<HTMLSelectElement>("color-by");
  const selector = el<HTMLSelectElement>("best-of-selector");
  const rewardOptions = meta.rewards
    .map((r) => `<option value="${r.id}">r${r.id} ${r.name}</option>`)
    .join("");
  colorBy.innerHTML = rewardOptions;
  selector.innerHTML = rewardOptions;

  const presets = el<HTMLDivElement>("preset-buttons");
  presets.innerHTML =
    meta.rewards
      .map((r) => `<button data-isolate="${r.id}">Isolate r${r.id}</button>`)
      .join("") + `<button id="preset-all">All</button>`;
}

function syncControls(): void {
  for (let j = 0; j < meta.n_rewards; j++) {
    const plus = el<HTMLInputElement>(`splus-${j}`);
    const minus = el<HTMLInputElement>(`sminus-${j}`);
    plus.value = String(state.sPlus[j]);
    minus.value = String(state.sMinus[j]);
    el<HTMLSpanElement>(`splus-${j}-value`).textContent = fmt(state.sPlus[j] ?? 0);
    el<HTMLSpanElement>(`sminus-${j}-value`).textContent = fmt(state.sMinus[j] ?? 0);
  }
  el<HTMLInputElement>("omega").value = String(state.omega);
  el<HTMLSpanElement>("omega-value").textContent = fmt(state.omega);
  el<HTMLSelectElement>("condition").value = String(state.condition);
  el<HTMLInputElement>("count").value = String(state.count);
  el<HTMLInputElement>("seed").value = String(state.seed);
  el<HTMLInputElement>("seed-locked").checked = state.seedLocked;
  el<HTMLInputElement>("best-of-enabled").checked = state.bestOfEnabled;
  el<HTMLInputElement>("best-of-n").value = String(state.bestOfN);
  el<HTMLSelectElement>("best-of-selector").value = String(state.bestOfSelector);
  el<HTMLSelectElement>("color-by").value = String(state.colorBy);
  el<HTMLInputElement>("pairwise-t").value = String(state.pairwiseT);
  el<HTMLSpanElement>("pairwise-t-value").textContent = fmt(state.pairwiseT);
}

function fmt(v: number | undefined): string {
  return (v ?? 0).toFixed(3).replace(/\.?0+$/, "") || "0";
}

function readState(): void {
  const next = { ...state, sPlus: state.sPlus.slice(), sMinus: state.sMinus.slice() };
  for (let j = 0; j < meta.n_rewards; j++) {
    next.sPlus[j] = Number(el<HTMLInputElement>(`splus-${j}`).value);
    next.sMinus[j] = Number(el<HTMLInputElement>(`sminus-${j}`).value);
  }
  next.omega = Number(el<HTMLInputElement>("omega").value);
  next.condition = Number(el<HTMLSelectElement>("condition").value);
  next.count = Number(el<HTMLInputElement>("count").value);
  next.seed = Number(el<HTMLInputElement>("seed").value);
  next.seedLocked = el<HTMLInputElement>("seed-locked").checked;
  next.bestOfEnabled = el<HTMLInputElement>("best-of-enabled").checked;
  next.bestOfN = Number(el<HTMLInputElement>("best-of-n").value);
  next.bestOfSelector = Number(el<HTMLSelectElement>("best-of-selector").value);
  next.colorBy = Number(el<HTMLSelectElement>("color-by").value);
  next.pairwiseT = Number(el<HTMLInputElement>("pairwise-t").value);
  state = clampState(next, meta);
}

function renderStats(response: SampleResponse | null): void {
  const table = el<HTMLTableElement>("stats-table");
  if (!response) {
    table.innerHTML = "";
    return;
  }
  const rows = meta.rewards
    .map((r) => {
      const j = r.id;
      return `<tr><td>r${j} ${r.name}</td>
        <td>${response.stats.mean[j]?.toFixed(4)}</td>
        <td>${response.stats.std[j]?.toFixed(4)}</td>
        <td>${response.stats.min[j]?.toFixed(4)}</td>
        <td>${response.stats.max[j]?.toFixed(4)}</td></tr>`;
    })
    .join("");
  table.innerHTML =
    `<tr><th>reward</th><th>mean</th><th>std</th><th>min</th><th>max</th></tr>${rows}`;
}

function renderScatter(): void {
  const canvas = el<HTMLCanvasElement>("scatter");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const scene = buildScene(lastResponse, {
    width: canvas.width,
    height: canvas.height,
    colorBy: state.colorBy,
  });
  drawScene(ctx, scene);
}

function renderHistory(): void {
  const body = el<HTMLTableSectionElement>("history-body");
  const items = history.entries();
  body.innerHTML = items
    .map((e, i) => {
      const means = e.stats.mean.map((m) => m.toFixed(3)).join(" / ");
      return `<tr data-index="${i}"><td>${i + 1}</td>
        <td>c${e.request.condition} w${e.request.omega}</td>
        <td>${means}</td></tr>`;
    })
    .reverse()
    .join("");
}

async function requestSample(): Promise<void> {
  let request: SampleRequest;
  try {
    request = toSampleRequest(state, meta);
  } catch (err) {
    setStatus(`invalid request: ${(err as Error).message}`, true);
    return;
  }
  setStatus("sampling...");
  try {
    const response = await inflight.run((signal) => client.sample(request, signal));
    if (response === null) return; // superseded by a newer slider state
    lastResponse = response;
    history.push({ request: response.request, stats: response.stats });
    renderStats(response);
    renderScatter();
    renderHistory();
    setStatus(
      `ok: ${response.points.length} points in ${response.elapsed_ms.toFixed(0)} ms ` +
      `(checkpoint ${response.checkpoint_digest.slice(0, 8)})`,
    );
  } catch (err) {
    if (err instanceof GatewayError) {
      setStatus(`gateway ${err.status}: ${JSON.stringify(err.details)}`, true);
    } else {
      setStatus(`request failed: ${(err as Error).message}`, true);
    }
  }
}

const debouncedSample = debounce(() => {
  state = rollSeed(state);
  syncControls();
  void requestSample();
}, DEBOUNCE_MS);

function onControlChange(): void {
  readState();
  syncControls();
  debouncedSample();
}

function wireEvents(): void {
  el<HTMLDivElement>("controls").addEventListener("input", onControlChange);
  el<HTMLButtonElement>("resample").addEventListener("click", () => {
    state = rollSeed(state);
    syncControls();
    void requestSample();
  });
  el<HTMLDivElement>("preset-buttons").addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (target.dataset.isolate !== undefined) {
      state = applyIsolatePreset(state, Number(target.dataset.isolate));
    } else if (target.id === "preset-all") {
      state = applyAllPreset(state);
    } else {
      return;
    }
    syncControls();
    void requestSample();
  });
  el<HTMLInputElement>("pairwise-t").addEventListener("input", () => {
    const t = Number(el<HTMLInputElement>("pairwise-t").value);
    state = applyPairwisePreset(state, PAIRWISE_A, PAIRWISE_B, t);
    syncControls();
    debouncedSample();
  });
  el<HTMLTableSectionElement>("history-body").addEventListener("click", (ev) => {
    const row = (ev.target as HTMLElement).closest("tr");
    if (!row || row.dataset.index === undefined) return;
    const entry = history.get(Number(row.dataset.index));
    const r = entry.request;
    state = clampState({
      ...state,
      sPlus: r.s_plus.slice(),
      sMinus: r.s_minus.slice(),
      omega: r.omega,
      condition: r.condition,
      count: r.count,
      seed: r.seed,
      bestOfEnabled: r.best_of !== null,
      bestOfN: r.best_of?.n ?? state.bestOfN,
      bestOfSelector: r.best_of?.selector ?? state.bestOfSelector,
    }, meta);
    syncControls();
    void requestSample();
  });
  el<HTMLButtonElement>("export-csv").addEventListener("click", () => {
    const blob = new Blob([history.toCsv()], { type: "text/csv" });
    const url = URL.createObjectURL(blob);
    const a = document.createElement("a");
    a.href = url;
    a.download = "steering-history.csv";
    a.click();
    URL.revokeObjectURL(url);
  });
}

async function init(): Promise<void> {
  setStatus(`connecting to ${gatewayUrl} ...`);
  try {
    meta = await client.meta();
  } catch (err) {
    setStatus(`cannot reach gateway at ${gatewayUrl}: ${(err as Error).message}`, true);
    return;
  }
  state = defaultState(meta);
  buildControls();
  syncControls();
  wireEvents();
  el<HTMLSpanElement>("model-info").textContent =
    `${meta.mode} model, B=${meta.bins}, checkpoint ${meta.checkpoint_digest.slice(0, 8)}`;
  renderScatter();
  void requestSample();
}

void init();

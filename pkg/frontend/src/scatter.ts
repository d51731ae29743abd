// Scatter rendering split into a pure scene builder and a thin canvas
// executor. The scene is a plain data structure: identical responses build
// identical scenes, which is what makes locked-seed re-samples pixel-stable.

import type { SampleResponse } from "./types.js";

export const AXIS_RANGE = 2.2;

export interface ScenePoint {
  x: number;
  y: number;
  color: string;
}

export interface SceneRing {
  radius: number;
  stroke: string;
  dashed: boolean;
}

export interface Scene {
  width: number;
  height: number;
  axisRange: number;
  rings: SceneRing[];
  gridLines: boolean;
  points: ScenePoint[];
}

export interface SceneOptions {
  width: number;
  height: number;
  colorBy: number;
}

// compact blue->yellow ramp; value is normalized into [0, 1]
const RAMP: [number, [number, number, number]][] = [
  [0.0, [68, 1, 84]],
  [0.25, [59, 82, 139]],
  [0.5, [33, 145, 140]],
  [0.75, [94, 201, 98]],
  [1.0, [253, 231, 37]],
];

export function colorFor(value: number, lo: number, hi: number): string {
  const t = hi > lo ? Math.min(1, Math.max(0, (value - lo) / (hi - lo))) : 0.5;
  for (let i = 1; i < RAMP.length; i++) {
    const [t1, c1] = RAMP[i]!;
    const [t0, c0] = RAMP[i - 1]!;
    if (t <= t1) {
      const f = (t - t0) / (t1 - t0);
      const mix = c0.map((a, k) => Math.round(a + f * (c1[k]! - a)));
      return `rgb(${mix[0]},${mix[1]},${mix[2]})`;
    }
  }
  const last = RAMP[RAMP.length - 1]![1];
  return `rgb(${last[0]},${last[1]},${last[2]})`;
}

/** Deterministic scene from a response; null renders empty axes. The two
 * overlay rings mark the optima of the radius rewards (|x|=1 and |x|=1.5). */
export function buildScene(response: SampleResponse | null, opts: SceneOptions): Scene {
  const rings: SceneRing[] = [
    { radius: 1.0, stroke: "#8888aa", dashed: false },
    { radius: 1.5, stroke: "#aa8888", dashed: true },
  ];
  const points: ScenePoint[] = [];
  if (response && response.points.length > 0) {
    const values = response.rewards.map((row) => row[opts.colorBy] ?? 0);
    const lo = Math.min(...values);
    const hi = Math.max(...values);
    response.points.forEach(([x, y], i) => {
      points.push({ x, y, color: colorFor(values[i]!, lo, hi) });
    });
  }
  return {
    width: opts.width,
    height: opts.height,
    axisRange: AXIS_RANGE,
    rings,
    gridLines: true,
    points,
  };
}

export function drawScene(ctx: CanvasRenderingContext2D, scene: Scene): void {
  const { width, height, axisRange } = scene;
  const sx = (x: number) => ((x + axisRange) / (2 * axisRange)) * width;
  const sy = (y: number) => height - ((y + axisRange) / (2 * axisRange)) * height;

  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#11131a";
  ctx.fillRect(0, 0, width, height);

  if (scene.gridLines) {
    ctx.strokeStyle = "#22252f";
    ctx.lineWidth = 1;
    for (let v = -2; v <= 2; v += 1) {
      ctx.beginPath();
      ctx.moveTo(sx(v), 0);
      ctx.lineTo(sx(v), height);
      ctx.stroke();
      ctx.beginPath();
      ctx.moveTo(0, sy(v));
      ctx.lineTo(width, sy(v));
      ctx.stroke();
    }
  }

  for (const ring of scene.rings) {
    ctx.strokeStyle = ring.stroke;
    ctx.lineWidth = 1.5;
    ctx.setLineDash(ring.dashed ? [6, 4] : []);
    ctx.beginPath();
    ctx.ellipse(sx(0), sy(0), (ring.radius / (2 * axisRange)) * width,
                (ring.radius / (2 * axisRange)) * height, 0, 0,

                2 * Math.PI);
    ctx.stroke();
  }
  ctx.setLineDash([]);

  for (const p of scene.points) {
    ctx.fillStyle = p.color;
    ctx.beginPath();
    ctx.arc(sx(p.x), sy(p.y), 2.5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

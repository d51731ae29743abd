import { describe, expect, it } from "vitest";

import { AXIS_RANGE, buildScene, colorFor } from "../src/scatter.js";
import type { SampleResponse } from "../src/types.js";

function makeResponse(): SampleResponse {
  return {
    points: [[0.5, 0.5], [-1.0, 0.2], [1.4, -0.3]],
    rewards: [
      [-0.29, 0.9, -0.5, -0.6],
      [-0.02, -0.3, -0.2, -0.25],
      [-0.43, 0.5, -0.3, -0.01],
    ],
    stats: { mean: [0, 0, 0, 0], std: [0, 0, 0, 0], min: [0, 0, 0, 0],
             max: [0, 0, 0, 0], count: 3 },
    request: {
      condition: 0, s_plus: [1, 1, 1, 1], s_minus: [0, 0, 0, 0],
      omega: 2, count: 3, seed: 0, steps: 50, best_of: null,
    },
    checkpoint_digest: "x",
    elapsed_ms: 1,
  };
}

const OPTS = { width: 640, height: 640, colorBy: 0 };

describe("buildScene", () => {
  it("is deterministic: identical responses build identical scenes", () => {
    // the pixel-stability contract: same response + options => same scene
    const a = buildScene(makeResponse(), OPTS);
    const b = buildScene(makeResponse(), OPTS);
    expect(a).toEqual(b);
  });

  it("empty response renders axes and overlays only", () => {
    const scene = buildScene(null, OPTS);
    expect(scene.points).toHaveLength(0);
    expect(scene.rings.map((r) => r.radius)).toEqual([1.0, 1.5]);
    expect(scene.axisRange).toBe(AXIS_RANGE);
  });

  it("color toggle changes only colors, never positions", () => {
    const byR0 = buildScene(makeResponse(), OPTS);
    const byR3 = buildScene(makeResponse(), { ...OPTS, colorBy: 3 });
    expect(byR0.points.map((p) => [p.x, p.y]))
      .toEqual(byR3.points.map((p) => [p.x, p.y]));
    expect(byR0.points.map((p) => p.color))
      .not.toEqual(byR3.points.map((p) => p.color));
  });

  it("points carry the response coordinates untouched", () => {
    const scene = buildScene(makeResponse(), OPTS);
    expect(scene.points.map((p) => [p.x, p.y])).toEqual(makeResponse().points);
  });
});

describe("colorFor", () => {
  it("maps the range endpoints to the ramp endpoints", () => {
    expect(colorFor(0, 0, 1)).toBe("rgb(68,1,84)");
    expect(colorFor(1, 0, 1)).toBe("rgb(253,231,37)");
  });

  it("degenerate range lands mid-ramp", () => {
    expect(colorFor(5, 5, 5)).toBe(colorFor(0.5, 0, 1));
  });

  it("clamps out-of-range values", () => {
    expect(colorFor(-10, 0, 1)).toBe(colorFor(0, 0, 1));
    expect(colorFor(10, 0, 1)).toBe(colorFor(1, 0, 1));
  });
});

// Wire types for the gateway's JSON endpoints.

export interface RewardInfo {
  id: number;
  name: string;
  description: string;
  range_hint: [number, number];
}

export interface Meta {
  version: string;
  n_rewards: number;
  bins: number;
  conditions: number;
  mode: string;
  checkpoint_digest: string;
  rewards: RewardInfo[];
  defaults: {
    omega: number;
    steps: number;
    count: number;
    max_count: number;
    max_steps: number;
  };
}

export interface BestOfSpec {
  n: number;
  selector: number;
}

export interface SampleRequest {
  condition: number;
  s_plus: number[];
  s_minus: number[];
  omega: number;
  count: number;
  seed: number;
  steps: number;
  best_of: BestOfSpec | null;
}

export interface RewardStats {
  mean: number[];
  std: number[];
  min: number[];
  max: number[];
  count: number;
}

export interface SampleResponse {
  points: [number, number][];
  rewards: number[][];
  stats: RewardStats;
  request: SampleRequest;
  checkpoint_digest: string;
  elapsed_ms: number;
}

export interface SweepRequest {
  reward: number;
  grid: number[];
  samples_per_point: number;
  omega: number;
  steps: number;
  seed: number;
}

export interface SweepCurve {
  kind: string;
  axis: number[];
  mean: number[][];
  se: number[][];
  samples_per_point: number;
  provenance: Record<string, unknown>;
}

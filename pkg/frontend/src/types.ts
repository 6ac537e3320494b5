// JSON shapes of the prediction service API. This file is the single
// source of truth for the schema the UI consumes; every number the UI
// displays comes from one of these fields.

export interface TargetScore {
  target: string;
  family: string | null;
  score: number;
  auc: number | null;
  distance: number;
  reliable: boolean;
}

export interface PredictionResult {
  smiles: string;
  canonical_key?: string;
  distance?: number;
  reliable?: boolean;
  targets?: TargetScore[];
  error?: string;
}

export interface PredictResponse {
  results: PredictionResult[];
}

export interface TargetInfo {
  target: string;
  family: string | null;
  auc: number | null;
}

export interface TargetsResponse {
  targets: TargetInfo[];
}

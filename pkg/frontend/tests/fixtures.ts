import type { PredictResponse, PredictionResult } from "../src/types";

// Golden response captured from the service for ["CCO"]; the UI must
// display exactly these values.
export const goldenEthanol: PredictionResult = {
  smiles: "CCO",
  canonical_key: "3|C:2;O:1|C-C;C-O",
  distance: 0.1234,
  reliable: true,
  targets: [
    {
      target: "T_weight",
      family: "Nuclear Receptor",
      score: 0.112233,
      auc: 0.91,
      distance: 0.1234,
      reliable: true,
    },
    {
      target: "T_aromatic",
      family: "Cell Cycle",
      score: 0.887766,
      auc: 0.88,
      distance: 0.1234,
      reliable: true,
    },
    {
      target: "T_halogen",
      family: "Stress Response",
      score: 0.445566,
      auc: null,
      distance: 0.1234,
      reliable: false,
    },
  ],
};

export const goldenParseError: PredictionResult = {
  smiles: "C1CC",
  error: "unmatched ring closure 1 (offset 1)",
};

export const goldenResponse: PredictResponse = {
  results: [goldenEthanol],
};

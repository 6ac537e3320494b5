import type { PredictResponse, TargetsResponse } from "./types";

// 4xx carries a detail message and points at the input; network failures
// and 5xx are retryable.
export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number | null,
    public readonly retryable: boolean,
  ) {
    super(message);
  }
}

export interface ApiClient {
  predict(smiles: string[], targets?: string[]): Promise<PredictResponse>;
  targets(): Promise<TargetsResponse>;
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let res: Response;
  try {
    res = await fetch(url, init);
  } catch (err) {
    throw new ApiError(`service unreachable: ${err}`, null, true);
  }
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = await res.json();
      if (body && body.detail) detail = JSON.stringify(body.detail);
    } catch {
      // keep the status text
    }
    throw new ApiError(detail, res.status, res.status >= 500);
  }
  return (await res.json()) as T;
}

export function createClient(baseUrl: string): ApiClient {
  const base = baseUrl.replace(/\/$/, "");
  return {
    predict(smiles: string[], targets?: string[]) {
      return request<PredictResponse>(`${base}/v1/predict`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(targets ? { smiles, targets } : { smiles }),
      });
    },
    targets() {
      return request<TargetsResponse>(`${base}/v1/targets`);
    },
  };
}

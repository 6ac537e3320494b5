import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, createClient } from "../src/api";
import { goldenResponse } from "./fixtures";

function stubFetch(status: number, body: unknown): ReturnType<typeof vi.fn> {
  const mock = vi.fn(async () => ({
    ok: status < 400,
    status,
    statusText: `status ${status}`,
    json: async () => body,
  }));
  vi.stubGlobal("fetch", mock);
  return mock;
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("createClient", () => {
  it("posts SMILES to /v1/predict and returns the body unchanged", async () => {
    const mock = stubFetch(200, goldenResponse);
    const client = createClient("http://svc:8000/");
    const response = await client.predict(["CCO"]);
    expect(response).toEqual(goldenResponse);
    const [url, init] = mock.mock.calls[0];
    expect(url).toBe("http://svc:8000/v1/predict");
    expect(JSON.parse((init as RequestInit).body as string)).toEqual({
      smiles: ["CCO"],
    });
  });

  it("includes the target filter when given", async () => {
    const mock = stubFetch(200, goldenResponse);
    await createClient("http://svc:8000").predict(["CCO"], ["T_weight"]);
    const [, init] = mock.mock.calls[0];
    expect(JSON.parse((init as RequestInit).body as string)).toEqual({
      smiles: ["CCO"],
      targets: ["T_weight"],
    });
  });

  it("fetches /v1/targets", async () => {
    const body = { targets: [{ target: "T_weight", family: null, auc: 0.9 }] };
    const mock = stubFetch(200, body);
    const response = await createClient("http://svc:8000").targets();
    expect(response).toEqual(body);
    expect(mock.mock.calls[0][0]).toBe("http://svc:8000/v1/targets");
  });

  it("maps 400 to a non-retryable ApiError with the detail", async () => {
    stubFetch(400, { detail: "empty SMILES list" });
    const err = await createClient("http://svc:8000")
      .predict([])
      .catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(400);
    expect(err.retryable).toBe(false);
    expect(err.message).toContain("empty SMILES list");
  });

  it("maps 503 to a retryable ApiError", async () => {
    stubFetch(503, { detail: "no bundle loaded" });
    const err = await createClient("http://svc:8000")
      .predict(["CCO"])
      .catch((e) => e);
    expect(err.status).toBe(503);
    expect(err.retryable).toBe(true);
  });

  it("maps network failure to a retryable ApiError with null status", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => {
        throw new TypeError("fetch failed");
      }),
    );
    const err = await createClient("http://svc:8000")
      .predict(["CCO"])
      .catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBeNull();
    expect(err.retryable).toBe(true);
  });
});

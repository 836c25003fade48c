import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, ServiceClient } from "../src/api.js";
import { DIMENSIONS } from "../src/types.js";
import type { Choice, Dimension } from "../src/types.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("ServiceClient", () => {
  it("posts query and config to /sessions", async () => {
    const fetchMock = vi.fn(async () => jsonResponse(201, { id: "s-1", status: "running" }));
    vi.stubGlobal("fetch", fetchMock);
    const client = new ServiceClient();
    const created = await client.createSession("build me a planner", { max_iterations: 2 });
    expect(created.id).toBe("s-1");
    const [url, init] = fetchMock.mock.calls[0]!;
    expect(url).toBe("/sessions");
    expect(JSON.parse((init as RequestInit).body as string)).toEqual({
      query: "build me a planner",
      config: { max_iterations: 2 },
    });
  });

  it("maps service errors to ApiError with the machine code", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => jsonResponse(503, { code: "provider-unavailable", message: "no provider" })),
    );
    const client = new ServiceClient();
    const error = await client.createSession("q").catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.status).toBe(503);
    expect(error.code).toBe("provider-unavailable");
    expect(error.message).toBe("no provider");
  });

  it("handles non-JSON error bodies", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => new Response("gateway exploded", { status: 502 })));
    const error = await new ServiceClient().getSession("s-9").catch((e) => e);
    expect(error.code).toBe("unknown-error");
    expect(error.status).toBe(502);
  });

  it("builds encoded artifact URLs", () => {
    const client = new ServiceClient("http://svc");
    expect(client.artifactUrl("s 1/i2")).toBe("http://svc/artifacts/s%201%2Fi2/html");
  });

  it("submits annotations as-is", async () => {
    const fetchMock = vi.fn(async () => jsonResponse(201, { id: "i/a" }));
    vi.stubGlobal("fetch", fetchMock);
    const choices = Object.fromEntries(DIMENSIONS.map((d) => [d, "Left"])) as Record<
      Dimension,
      Choice
    >;
    await new ServiceClient().submitAnnotation({
      instance_id: "i",
      query_id: "q",
      left: "GenUI",
      right: "ConvUI",
      annotator_id: "a",
      choices,
      comment: "",
    });
    const [url, init] = fetchMock.mock.calls[0]!;
    expect(url).toBe("/annotations");
    const body = JSON.parse((init as RequestInit).body as string);
    expect(Object.keys(body.choices)).toHaveLength(8);
  });
});

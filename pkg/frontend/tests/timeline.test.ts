import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import type { ServiceClient } from "../src/api.js";
import { POLL_INTERVAL_MS, isTerminal, renderTimeline, startPolling } from "../src/timeline.js";
import type { SessionSummary } from "../src/types.js";

function summary(status: SessionSummary["status"], iterations = 1): SessionSummary {
  return {
    id: "s-1",
    created_at: "2026-08-10T00:00:00+00:00",
    status,
    query: "I want to understand quantum physics principles.",
    iterations: Array.from({ length: iterations }, (_, i) => ({
      index: i + 1,
      scores: [82, 85.5, 79],
      selected: 2,
      best_so_far: { artifact_id: `s-1-i${i + 1}c2`, score: 85.5 },
    })),
    final_artifact: status === "converged" ? "s-1-i2c1" : null,
    error: status === "failed" ? "boom" : null,
    event_count: iterations + 2,
  };
}

describe("renderTimeline", () => {
  it("shows status badge, per-iteration scores, and the selected candidate", () => {
    const root = document.createElement("div");
    renderTimeline(root, summary("running", 2));
    expect(root.querySelector(".status-badge")!.textContent).toBe("running");
    const rows = root.querySelectorAll(".iteration");
    expect(rows).toHaveLength(2);
    expect(rows[0]!.textContent).toContain("[85.5]");
    expect(rows[0]!.textContent).toContain("best so far 85.5");
  });

  it("badges terminal states and shows the final artifact", () => {
    const root = document.createElement("div");
    renderTimeline(root, summary("converged", 2));
    expect(root.querySelector(".status-converged")).not.toBeNull();
    expect(root.querySelector(".final-artifact")!.textContent).toContain("s-1-i2c1");
  });

  it("shows the failure reason", () => {
    const root = document.createElement("div");
    renderTimeline(root, summary("failed"));
    expect(root.querySelector(".error-banner")!.textContent).toBe("boom");
  });
});

describe("startPolling", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("polls at one-second cadence until the session is terminal", async () => {
    const responses = [summary("running"), summary("running", 2), summary("converged", 2)];
    const getSession = vi.fn(async () => responses[Math.min(getSession.mock.calls.length - 1, 2)]!);
    const client = { getSession } as unknown as ServiceClient;
    const seen: string[] = [];
    startPolling(client, "s-1", (session) => seen.push(session.status));

    await vi.advanceTimersByTimeAsync(0);
    expect(getSession).toHaveBeenCalledTimes(1);
    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS);
    expect(getSession).toHaveBeenCalledTimes(2);
    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS);
    expect(getSession).toHaveBeenCalledTimes(3);
    expect(seen).toEqual(["running", "running", "converged"]);

    // terminal: the loop must stop on its own
    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS * 5);
    expect(getSession).toHaveBeenCalledTimes(3);
  });

  it("keeps polling through transient errors, reporting each", async () => {
    const getSession = vi
      .fn<[], Promise<SessionSummary>>()
      .mockRejectedValueOnce(new Error("blip"))
      .mockResolvedValue(summary("converged"));
    const client = { getSession } as unknown as ServiceClient;
    const errors: unknown[] = [];
    const updates: string[] = [];
    startPolling(client, "s-1", (session) => updates.push(session.status), (e) => errors.push(e));

    await vi.advanceTimersByTimeAsync(0);
    expect(errors).toHaveLength(1);
    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS);
    expect(updates).toEqual(["converged"]);
  });

  it("stop() halts the loop immediately", async () => {
    const getSession = vi.fn(async () => summary("running"));
    const client = { getSession } as unknown as ServiceClient;
    const handle = startPolling(client, "s-1", () => undefined);
    await vi.advanceTimersByTimeAsync(0);
    handle.stop();
    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS * 3);
    expect(getSession).toHaveBeenCalledTimes(1);
  });
});

describe("isTerminal", () => {
  it("treats converged, exhausted, and failed as terminal", () => {
    expect(isTerminal("running")).toBe(false);
    for (const status of ["converged", "exhausted", "failed"] as const) {
      expect(isTerminal(status)).toBe(true);
    }
  });
});

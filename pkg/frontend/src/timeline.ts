import type { ServiceClient } from "./api.js";
import type { SessionStatus, SessionSummary } from "./types.js";

export const POLL_INTERVAL_MS = 1000;

export const TERMINAL_STATUSES: SessionStatus[] = ["converged", "exhausted", "failed"];

export function isTerminal(status: SessionStatus): boolean {
  return TERMINAL_STATUSES.includes(status);
}

/** Render the session timeline: one row per iteration, scores as fetched. */
export function renderTimeline(root: HTMLElement, session: SessionSummary): void {
  root.innerHTML = "";
  const badge = document.createElement("span");
  badge.className = `status-badge status-${session.status}`;
  badge.textContent = session.status;
  const heading = document.createElement("h2");
  heading.textContent = `Session ${session.id}`;
  heading.appendChild(badge);
  root.appendChild(heading);

  const query = document.createElement("p");
  query.className = "session-query";
  query.textContent = session.query;
  root.appendChild(query);

  if (session.error) {
    const error = document.createElement("p");
    error.className = "error-banner";
    error.textContent = session.error;
    root.appendChild(error);
  }

  const list = document.createElement("ol");
  list.className = "timeline";
  for (const iteration of session.iterations) {
    const item = document.createElement("li");
    item.className = "iteration";
    item.dataset.index = String(iteration.index);
    const scores = iteration.scores
      .map((score, i) => (i + 1 === iteration.selected ? `[${score}]` : `${score}`))
      .join("  ");
    item.textContent = `iteration ${iteration.index}: ${scores} | best so far ${iteration.best_so_far.score}`;
    list.appendChild(item);
  }
  root.appendChild(list);

  if (session.final_artifact) {
    const final = document.createElement("p");
    final.className = "final-artifact";
    final.dataset.artifactId = session.final_artifact;
    final.textContent = `final artifact: ${session.final_artifact}`;
    root.appendChild(final);
  }
}

export interface PollHandle {
  stop(): void;
}

/** Poll the session until it reaches a terminal status.
 *
 * onUpdate fires for every successful fetch (including the terminal one);
 * onError fires for fetch failures without stopping the loop, so a blip
 * doesn't kill a live timeline.
 */
export function startPolling(
  client: ServiceClient,
  sessionId: string,
  onUpdate: (session: SessionSummary) => void,
  onError: (error: unknown) => void = () => undefined,
  intervalMs: number = POLL_INTERVAL_MS,
): PollHandle {
  let stopped = false;
  let timer: ReturnType<typeof setTimeout> | null = null;

  const tick = async () => {
    if (stopped) return;
    try {
      const session = await client.getSession(sessionId);
      if (stopped) return;
      onUpdate(session);
      if (isTerminal(session.status)) {
        stopped = true;
        return;
      }
    } catch (error) {
      if (stopped) return;
      onError(error);
    }
    timer = setTimeout(tick, intervalMs);
  };

  void tick();
  return {
    stop() {
      stopped = true;
      if (timer !== null) clearTimeout(timer);
    },
  };
}

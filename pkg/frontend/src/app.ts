import { ApiError, ServiceClient } from "./api.js";
import { buildAnnotationForm } from "./annotation.js";
import { renderArtifactPane } from "./sandbox.js";
import { isTerminal, renderTimeline, startPolling } from "./timeline.js";
import type { PollHandle } from "./timeline.js";
import type { AnnotationInstance, SessionConfig, SessionSummary } from "./types.js";

export function showBanner(root: HTMLElement, message: string): void {
  let banner = root.querySelector<HTMLElement>(".error-banner-global");
  if (!banner) {
    banner = document.createElement("div");
    banner.className = "error-banner-global";
    root.prepend(banner);
  }
  banner.textContent = message;
  banner.hidden = false;
}

export function clearBanner(root: HTMLElement): void {
  const banner = root.querySelector<HTMLElement>(".error-banner-global");
  if (banner) banner.hidden = true;
}

/** Query submission form with the refinement config controls. */
export function buildQueryForm(
  root: HTMLElement,
  onSubmitted: (sessionId: string) => void,
  client: ServiceClient,
): HTMLFormElement {
  const form = document.createElement("form");
  form.className = "query-form";
  form.innerHTML = `
    <textarea name="query" placeholder="What should the interface help with?" required></textarea>
    <div class="config-controls">
      <label>candidates <input name="candidates" type="number" min="1" value="3"></label>
      <label>max iterations <input name="max_iterations" type="number" min="1" value="5"></label>
      <label>threshold <input name="threshold" type="number" min="0" max="100" value="90"></label>
      <label>reward
        <select name="reward"><option value="adaptive">adaptive</option><option value="static">static</option></select>
      </label>
      <label>generation
        <select name="generation"><option value="iterative">iterative</option><option value="one_shot">one-shot</option></select>
      </label>
      <label>representation
        <select name="representation"><option value="structured">structured</option><option value="natural_language">natural language</option></select>
      </label>
    </div>
    <button type="submit">Generate interface</button>
  `;
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const query = String(data.get("query") ?? "").trim();
    if (!query) {
      showBanner(root, "enter a query first");
      return;
    }
    clearBanner(root);
    const config: SessionConfig = {
      candidates_per_iteration: Number(data.get("candidates")),
      max_iterations: Number(data.get("max_iterations")),
      score_threshold: Number(data.get("threshold")),
      reward_origin: data.get("reward") as SessionConfig["reward_origin"],
      generation_mode: data.get("generation") as SessionConfig["generation_mode"],
      representation_mode: data.get("representation") as SessionConfig["representation_mode"],
    };
    try {
      const created = await client.createSession(query, config);
      onSubmitted(created.id);
    } catch (error) {
      if (error instanceof ApiError) {
        showBanner(root, `${error.code}: ${error.message}`);
      } else {
        showBanner(root, "service unreachable; retry");
      }
    }
  });
  root.appendChild(form);
  return form;
}

/** Live session view: timeline polling plus the final artifact pane. */
export function mountSessionView(
  root: HTMLElement,
  client: ServiceClient,
  sessionId: string,
): PollHandle {
  root.innerHTML = "";
  const timeline = document.createElement("div");
  timeline.className = "timeline-pane";
  const artifact = document.createElement("div");
  artifact.className = "artifact-pane";
  root.appendChild(timeline);
  root.appendChild(artifact);

  let shownArtifact: string | null = null;
  return startPolling(
    client,
    sessionId,
    (session: SessionSummary) => {
      clearBanner(root);
      renderTimeline(timeline, session);
      if (isTerminal(session.status) && session.final_artifact && session.final_artifact !== shownArtifact) {
        shownArtifact = session.final_artifact;
        renderArtifactPane(artifact, client.artifactUrl(session.final_artifact));
      }
    },
    (error) => {
      const message =
        error instanceof ApiError ? `${error.code}: ${error.message}` : "poll failed; retrying";
      showBanner(root, message);
    },
  );
}

/** Side-by-side pairwise annotation: two sandboxed panes plus the form. */
export function mountAnnotationView(
  root: HTMLElement,
  client: ServiceClient,
  instance: AnnotationInstance,
): void {
  root.innerHTML = "";
  const panes = document.createElement("div");
  panes.className = "comparison-panes";
  const leftPane = document.createElement("section");
  leftPane.className = "pane pane-left";
  const rightPane = document.createElement("section");
  rightPane.className = "pane pane-right";
  panes.appendChild(leftPane);
  panes.appendChild(rightPane);
  root.appendChild(panes);
  if (instance.trapText) {
    renderArtifactPane(leftPane, null);
    renderArtifactPane(rightPane, null);
  } else {
    renderArtifactPane(leftPane, instance.leftArtifactUrl, `Example 1 (${instance.left})`);
    renderArtifactPane(rightPane, instance.rightArtifactUrl, `Example 2 (${instance.right})`);
  }
  const formHost = document.createElement("div");
  formHost.className = "annotation-host";
  root.appendChild(formHost);
  buildAnnotationForm(formHost, instance, (judgment) => client.submitAnnotation(judgment));
}

export function bootstrap(root: HTMLElement, client = new ServiceClient()): void {
  const header = document.createElement("header");
  header.innerHTML = "<h1>Interface generation console</h1>";
  root.appendChild(header);
  const home = document.createElement("main");
  root.appendChild(home);
  const view = document.createElement("section");
  view.className = "session-view";
  root.appendChild(view);
  let handle: PollHandle | null = null;
  buildQueryForm(home, (sessionId) => {
    handle?.stop();
    handle = mountSessionView(view, client, sessionId);
  }, client);
}

if (typeof document !== "undefined" && document.getElementById("console-root")) {
  bootstrap(document.getElementById("console-root") as HTMLElement);
}

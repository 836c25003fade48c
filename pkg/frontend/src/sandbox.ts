/** Sandboxed rendering of generated artifacts.
 *
 * The security contract lives in what the sandbox attribute does NOT grant:
 * no allow-same-origin (no cookies/storage/DOM of the host), no
 * allow-top-navigation (cannot move the operator off the console), no
 * allow-popups, no allow-forms. Scripts run, and that is all. The server
 * additionally sends a CSP with connect-src 'none', so even script-initiated
 * network calls are refused by the browser.
 */

export const SANDBOX_TOKENS = "allow-scripts";

export function createArtifactFrame(url: string, title = "generated interface"): HTMLIFrameElement {
  const frame = document.createElement("iframe");
  frame.setAttribute("sandbox", SANDBOX_TOKENS);
  frame.setAttribute("referrerpolicy", "no-referrer");
  frame.className = "artifact-frame";
  frame.title = title;
  frame.src = url;
  return frame;
}

export function renderArtifactPane(
  root: HTMLElement,
  url: string | null,
  title = "generated interface",
): void {
  root.innerHTML = "";
  if (!url) {
    const placeholder = document.createElement("div");
    placeholder.className = "artifact-placeholder";
    placeholder.textContent = "No artifact available.";
    root.appendChild(placeholder);
    return;
  }
  root.appendChild(createArtifactFrame(url, title));
}

/** Like renderArtifactPane, but verifies the artifact exists first; an
 * unknown id (404) gets the placeholder instead of a dead frame. */
export async function renderCheckedArtifactPane(
  root: HTMLElement,
  url: string,
  title = "generated interface",
): Promise<void> {
  try {
    const probe = await fetch(url, { method: "HEAD" });
    renderArtifactPane(root, probe.ok ? url : null, title);
  } catch {
    renderArtifactPane(root, null, title);
  }
}

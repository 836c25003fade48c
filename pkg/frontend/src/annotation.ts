import { ApiError } from "./api.js";
import { CHOICES, DIMENSIONS } from "./types.js";
import type { AnnotationInstance, Choice, Dimension, JudgmentPayload } from "./types.js";

export interface AnnotationForm {
  element: HTMLFormElement;
  isComplete(): boolean;
  missingDimensions(): Dimension[];
  choose(dimension: Dimension, choice: Choice): void;
  setComment(text: string): void;
  payload(): JudgmentPayload;
}

/** Build the eight-dimension pairwise annotation form.
 *
 * Submission stays disabled until every dimension has a choice, mirroring the
 * server's completeness rule; missing dimensions are highlighted on any
 * attempt to submit early. Server rejections (409 duplicate, 422 incomplete)
 * surface in the status line verbatim.
 */
export function buildAnnotationForm(
  root: HTMLElement,
  instance: AnnotationInstance,
  submit: (judgment: JudgmentPayload) => Promise<{ id: string }>,
): AnnotationForm {
  const form = document.createElement("form");
  form.className = "annotation-form";
  form.noValidate = true;

  if (instance.trapText) {
    // trap instances show their instruction verbatim; choices are recorded
    // unmodified and filtered server-side
    const trap = document.createElement("p");
    trap.className = "trap-instruction";
    trap.textContent = instance.trapText;
    form.appendChild(trap);
  }

  const chosen = new Map<Dimension, Choice>();

  for (const dimension of DIMENSIONS) {
    const row = document.createElement("fieldset");
    row.className = "dimension-row";
    row.dataset.dimension = dimension;
    const legend = document.createElement("legend");
    legend.textContent = dimension;
    row.appendChild(legend);
    for (const choice of CHOICES) {
      const label = document.createElement("label");
      const input = document.createElement("input");
      input.type = "radio";
      input.name = `dim-${dimension}`;
      input.value = choice;
      input.addEventListener("change", () => {
        chosen.set(dimension, choice);
        row.classList.remove("missing");
        submitButton.disabled = !isComplete();
      });
      label.appendChild(input);
      label.appendChild(document.createTextNode(choice === "Left" ? instance.left : choice === "Right" ? instance.right : "Tie"));
      row.appendChild(label);
    }
    form.appendChild(row);
  }

  const comment = document.createElement("textarea");
  comment.name = "comment";
  comment.placeholder = "Why? (optional)";
  form.appendChild(comment);

  const submitButton = document.createElement("button");
  submitButton.type = "submit";
  submitButton.textContent = "Submit judgment";
  submitButton.disabled = true;
  form.appendChild(submitButton);

  const status = document.createElement("p");
  status.className = "annotation-status";
  form.appendChild(status);

  function isComplete(): boolean {
    return DIMENSIONS.every((dimension) => chosen.has(dimension));
  }

  function missingDimensions(): Dimension[] {
    return DIMENSIONS.filter((dimension) => !chosen.has(dimension));
  }

  function highlightMissing(): void {
    for (const dimension of missingDimensions()) {
      form
        .querySelector(`fieldset[data-dimension="${dimension}"]`)
        ?.classList.add("missing");
    }
  }

  function payload(): JudgmentPayload {
    const choices = {} as Record<Dimension, Choice>;
    for (const [dimension, choice] of chosen) choices[dimension] = choice;
    return {
      instance_id: instance.instanceId,
      query_id: instance.queryId,
      left: instance.left,
      right: instance.right,
      annotator_id: instance.annotatorId,
      choices,
      comment: comment.value,
    };
  }

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    if (!isComplete()) {
      highlightMissing();
      status.textContent = `choose every dimension first (missing: ${missingDimensions().join(", ")})`;
      return;
    }
    submitButton.disabled = true;
    status.textContent = "submitting…";
    try {
      const accepted = await submit(payload());
      status.textContent = `recorded as ${accepted.id}`;
      form.classList.add("submitted");
    } catch (error) {
      submitButton.disabled = false;
      if (error instanceof ApiError) {
        status.textContent = `${error.code}: ${error.message}`;
      } else {
        status.textContent = "submission failed; retry";
      }
    }
  });

  root.appendChild(form);
  return {
    element: form,
    isComplete,
    missingDimensions,
    choose(dimension, choice) {
      const input = form.querySelector<HTMLInputElement>(
        `input[name="dim-${dimension}"][value="${choice}"]`,
      );
      if (!input) throw new Error(`no input for ${dimension}/${choice}`);
      input.checked = true;
      input.dispatchEvent(new Event("change"));
    },
    setComment(text) {
      comment.value = text;
    },
    payload,
  };
}

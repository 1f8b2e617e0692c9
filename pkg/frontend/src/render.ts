/**
 * HTML rendering. Pure string templates so the views are testable under Node
 * without a DOM; the browser entry point assigns the output to innerHTML.
 */

import type { PlanStep, StepEvent } from "./api.js";
import type { SceneDiff } from "./compare.js";
import type { TimelineState } from "./timeline.js";
import { finalArtifactId, orderedSteps } from "./timeline.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function stepByIndex(state: TimelineState, index: number): PlanStep | undefined {
  return state.plan.steps.find((s) => s.index === index);
}

export function renderStepCard(
  plan: PlanStep | undefined,
  event: StepEvent,
  artifactUrl: (id: string) => string,
): string {
  const action = plan ? escapeHtml(plan.step_action) : "(step removed from plan)";
  const kind = plan ? escapeHtml(plan.kind) : "unknown";
  const image =
    event.status === "succeeded" && event.artifact_id
      ? `<img class="step-image" src="${artifactUrl(event.artifact_id)}" alt="step ${event.step_index} output">`
      : "";
  return [
    `<article class="step-card status-${escapeHtml(event.status)}" data-step="${event.step_index}">`,
    `<header><span class="step-number">${event.step_index}</span>`,
    `<span class="step-kind">${kind}</span>`,
    `<span class="step-status">${escapeHtml(event.status)}</span></header>`,
    `<p class="step-action">${action}</p>`,
    image,
    `</article>`,
  ].join("");
}

export function renderTimeline(
  state: TimelineState,
  artifactUrl: (id: string) => string,
): string {
  const cards = orderedSteps(state)
    .map((event) => renderStepCard(stepByIndex(state, event.step_index), event, artifactUrl))
    .join("");
  return [
    `<section class="timeline" data-run="${escapeHtml(state.runId)}" data-status="${escapeHtml(state.runStatus)}">`,
    `<h2>${escapeHtml(state.plan.original_prompt)}</h2>`,
    cards,
    `</section>`,
  ].join("");
}

export function renderFinalCard(
  state: TimelineState,
  artifactUrl: (id: string) => string,
): string {
  const artifact = finalArtifactId(state);
  if (!artifact) {
    return `<section class="final-card empty">No final image yet.</section>`;
  }
  return [
    `<section class="final-card" data-artifact="${escapeHtml(artifact)}">`,
    `<h2>Final image</h2>`,
    `<img class="final-image" src="${artifactUrl(artifact)}" alt="final output">`,
    `</section>`,
  ].join("");
}

export function renderComparison(
  beforeArtifact: string,
  afterArtifact: string,
  diff: SceneDiff,
  artifactUrl: (id: string) => string,
): string {
  const changes = diff.changed
    .map(
      (c) =>
        `<li class="change" data-entity="${escapeHtml(c.entityId)}" data-attribute="${c.attribute}">` +
        `${escapeHtml(c.entityClass)} ${c.attribute}: ` +
        `<del>${escapeHtml(c.before ?? "none")}</del> → ` +
        `<ins>${escapeHtml(c.after ?? "none")}</ins></li>`,
    )
    .join("");
  const removed = diff.removed
    .map((e) => `<li class="removed">${escapeHtml(e.class)} (${escapeHtml(e.id)}) removed</li>`)
    .join("");
  const added = diff.added
    .map((e) => `<li class="added">${escapeHtml(e.class)} (${escapeHtml(e.id)}) added</li>`)
    .join("");
  return [
    `<section class="comparison">`,
    `<figure class="before"><img src="${artifactUrl(beforeArtifact)}" alt="before"><figcaption>before</figcaption></figure>`,
    `<figure class="after"><img src="${artifactUrl(afterArtifact)}" alt="after"><figcaption>after</figcaption></figure>`,
    `<ul class="changes">${changes}${removed}${added}</ul>`,
    `</section>`,
  ].join("");
}

/**
 * Timeline state: a pure reducer over step events.
 *
 * The server is authoritative; the timeline never computes scores or guesses
 * outcomes, it only folds at-least-once event delivery into one card per step
 * index (last event per index wins, matching the store's supersede rule).
 */

import type { Plan, Run, StepEvent } from "./api.js";

export interface TimelineState {
  runId: string;
  plan: Plan;
  runStatus: string;
  byIndex: Record<number, StepEvent>;
}

export function initTimeline(run: Run): TimelineState {
  const state: TimelineState = {
    runId: run.run_id,
    plan: run.plan,
    runStatus: run.status,
    byIndex: {},
  };
  // seed from the manifest: the last non-superseded record per index
  for (const record of run.steps) {
    if (record.status === "superseded") continue;
    state.byIndex[record.index] = {
      run_id: run.run_id,
      step_index: record.index,
      status: record.status,
      artifact_id: record.artifact_id,
      timestamp: record.finished_at ?? record.started_at,
    };
  }
  return state;
}

export function applyEvent(state: TimelineState, event: StepEvent): TimelineState {
  if (event.run_id !== state.runId) return state;
  return { ...state, byIndex: { ...state.byIndex, [event.step_index]: event } };
}

export function syncRun(state: TimelineState, run: Run): TimelineState {
  const fresh = initTimeline(run);
  return fresh;
}

export function orderedSteps(state: TimelineState): StepEvent[] {
  return Object.keys(state.byIndex)
    .map(Number)
    .sort((a, b) => a - b)
    .map((i) => state.byIndex[i]!);
}

/** Artifact of the highest successfully executed step, if any. */
export function finalArtifactId(state: TimelineState): string | null {
  const steps = orderedSteps(state);
  for (let i = steps.length - 1; i >= 0; i--) {
    const step = steps[i]!;
    if (step.status === "succeeded" && step.artifact_id) return step.artifact_id;
  }
  return null;
}

/** True once every planned step has a succeeded event. */
export function isComplete(state: TimelineState): boolean {
  return state.plan.steps.every(
    (step) => state.byIndex[step.index]?.status === "succeeded",
  );
}

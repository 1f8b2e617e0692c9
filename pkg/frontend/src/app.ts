/**
 * Browser entry point: wires the API client, timeline reducer and renderers
 * to the page. All state lives server-side; this file only reacts to events
 * and user clicks.
 */

import { MonitorClient } from "./api.js";
import { diffScenes } from "./compare.js";
import { renderComparison, renderFinalCard, renderTimeline } from "./render.js";
import { applyEvent, finalArtifactId, initTimeline, type TimelineState } from "./timeline.js";

export function startApp(root: HTMLElement, baseUrl = ""): void {
  const client = new MonitorClient(baseUrl);
  const artifactUrl = (id: string) => client.artifactPngUrl(id);

  root.innerHTML = [
    `<form id="new-run"><input id="prompt" placeholder="Describe the image"><button>Run</button></form>`,
    `<div id="controls"></div>`,
    `<div id="timeline"></div>`,
    `<div id="final"></div>`,
    `<div id="comparison"></div>`,
  ].join("");

  const timelineEl = root.querySelector<HTMLElement>("#timeline")!;
  const finalEl = root.querySelector<HTMLElement>("#final")!;
  const comparisonEl = root.querySelector<HTMLElement>("#comparison")!;
  const controlsEl = root.querySelector<HTMLElement>("#controls")!;

  let state: TimelineState | null = null;
  let previousFinal: string | null = null;
  let abort: AbortController | null = null;

  function paint(): void {
    if (!state) return;
    timelineEl.innerHTML = renderTimeline(state, artifactUrl);
    finalEl.innerHTML = renderFinalCard(state, artifactUrl);
  }

  async function paintComparison(): Promise<void> {
    if (!state) return;
    const current = finalArtifactId(state);
    if (!previousFinal || !current || previousFinal === current) return;
    const [before, after] = await Promise.all([
      client.getScene(previousFinal),
      client.getScene(current),
    ]);
    comparisonEl.innerHTML = renderComparison(
      previousFinal,
      current,
      diffScenes(before, after),
      artifactUrl,
    );
  }

  async function watch(runId: string): Promise<void> {
    abort?.abort();
    abort = new AbortController();
    for await (const event of client.events(runId, { signal: abort.signal })) {
      if (!state) continue;
      state = applyEvent(state, event);
      paint();
      await paintComparison();
    }
  }

  function renderControls(runId: string): void {
    controlsEl.innerHTML = [
      `<button id="pause">Pause</button>`,
      `<button id="resume">Resume</button>`,
      `<label>Step <input id="iv-index" type="number" value="2" min="1" size="3"></label>`,
      `<label>Action <input id="iv-action" placeholder="Detail e1: color=blue"></label>`,
      `<button id="apply">Edit step &amp; rerun</button>`,
    ].join("");
    controlsEl.querySelector("#pause")!.addEventListener("click", async () => {
      state = initTimeline(await client.pause(runId));
      paint();
    });
    controlsEl.querySelector("#resume")!.addEventListener("click", async () => {
      state = initTimeline(await client.resume(runId));
      paint();
      void watch(runId);
    });
    controlsEl.querySelector("#apply")!.addEventListener("click", async () => {
      if (!state) return;
      const index = Number(
        controlsEl.querySelector<HTMLInputElement>("#iv-index")!.value,
      );
      const action = controlsEl.querySelector<HTMLInputElement>("#iv-action")!.value;
      const step = state.plan.steps.find((s) => s.index === index);
      if (!step || !action) return;
      previousFinal = finalArtifactId(state);
      await client.pause(runId);
      await client.intervene(runId, {
        kind: "edit_step",
        at_index: index,
        payload: { ...step, step_action: action },
      });
      await client.intervene(runId, { kind: "rerun_from", at_index: index });
      state = initTimeline(await client.resume(runId));
      paint();
      void watch(runId);
    });
  }

  root.querySelector("#new-run")!.addEventListener("submit", async (e) => {
    e.preventDefault();
    const prompt = root.querySelector<HTMLInputElement>("#prompt")!.value;
    if (!prompt) return;
    const run = await client.createRun({ prompt });
    state = initTimeline(run);
    previousFinal = null;
    comparisonEl.innerHTML = "";
    renderControls(run.run_id);
    paint();
    void watch(run.run_id);
  });
}

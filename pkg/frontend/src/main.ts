/**
 * Browser workspace: stage stepper, mask canvas, refine editor, score panel,
 * and the before/after comparator. All pipeline logic lives server-side; this
 * file is rendering and event glue over the tested core modules.
 */

import { StudioClient, type SessionPayload, type SpecPayload } from "./api.js";
import { comparatorVisible, maskOutline, wipeColumn } from "./comparator.js";
import { pollJob } from "./jobs.js";
import { CanvasMaskState, type Tool } from "./maskRaster.js";
import { deriveEnabledStages, type StageName } from "./transitions.js";

const baseUrl = (window as { STUDIO_BASE_URL?: string }).STUDIO_BASE_URL ?? "";
const client = new StudioClient(baseUrl);

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
};

const stateEl = {
  stepper: el<HTMLDivElement>("stepper"),
  status: el<HTMLDivElement>("status"),
  canvas: el<HTMLCanvasElement>("mask-canvas"),
  canvasWrap: el<HTMLDivElement>("canvas-wrap"),
  refinePanel: el<HTMLDivElement>("refine-panel"),
  refineText: el<HTMLTextAreaElement>("refine-text"),
  scorePanel: el<HTMLDivElement>("score-panel"),
  comparator: el<HTMLDivElement>("comparator"),
  compareCanvas: el<HTMLCanvasElement>("compare-canvas"),
  compareSlider: el<HTMLInputElement>("compare-slider"),
  outlineToggle: el<HTMLInputElement>("outline-toggle"),
};

let session: SessionPayload | null = null;
let spec: SpecPayload | null = null;
let maskState: CanvasMaskState | null = null;
let baseImage: HTMLImageElement | null = null;
let inpaintedImage: HTMLImageElement | null = null;
let maskBits: Uint8Array | null = null;

function setStatus(text: string, isError = false): void {
  stateEl.status.textContent = text;
  stateEl.status.className = isError ? "status error" : "status";
}

async function loadImage(url: string): Promise<HTMLImageElement> {
  const image = new Image();
  image.src = `${url}?t=${Date.now()}`; // bust cache across stage reruns
  await image.decode();
  return image;
}

// ---------------------------------------------------------------------------
// rendering
// ---------------------------------------------------------------------------

const STATES = ["Created", "Generated", "Masked", "Refined", "Inpainted", "Scored"];

function renderStepper(): void {
  const current = session?.state ?? "";
  stateEl.stepper.innerHTML = "";
  for (const state of STATES) {
    const step = document.createElement("span");
    step.className = state === current ? "step current" : "step";
    step.textContent = state;
    stateEl.stepper.appendChild(step);
  }
}

function renderActionButtons(): void {
  const enabled = new Set<StageName>(
    session && spec ? deriveEnabledStages(spec.transitions, session.state) : [],
  );
  for (const stage of ["generate", "mask", "refine", "inpaint", "score"] as StageName[]) {
    const on = enabled.has(stage);
    for (const button of document.querySelectorAll<HTMLButtonElement>(`[data-stage="${stage}"]`)) {
      button.disabled = !on;
    }
  }
  stateEl.canvasWrap.style.opacity = enabled.has("mask") ? "1" : "0.5";
}

function renderCanvas(): void {
  const canvas = stateEl.canvas;
  const ctx = canvas.getContext("2d");
  if (!ctx || !baseImage || !maskState) return;
  canvas.width = baseImage.naturalWidth;
  canvas.height = baseImage.naturalHeight;
  ctx.drawImage(baseImage, 0, 0);
  const { raster } = maskState;
  const overlay = ctx.getImageData(0, 0, canvas.width, canvas.height);
  const alpha = Math.round(maskState.overlayOpacity * 255);
  for (let i = 0; i < raster.data.length; i++) {
    if (!raster.data[i]) continue;
    const at = i * 4;
    // hard red overlay, opacity applied in a single blend pass
    overlay.data[at] = Math.min(255, overlay.data[at]! + alpha);
    overlay.data[at + 1] = Math.round(overlay.data[at + 1]! * (1 - maskState.overlayOpacity));
    overlay.data[at + 2] = Math.round(overlay.data[at + 2]! * (1 - maskState.overlayOpacity));
  }
  ctx.putImageData(overlay, 0, 0);
}

function renderScore(): void {
  const report = session?.score_report;
  if (!report) {
    stateEl.scorePanel.hidden = true;
    return;
  }
  stateEl.scorePanel.hidden = false;
  el<HTMLSpanElement>("score-initial").textContent = report.initial_score.toFixed(3);
  el<HTMLSpanElement>("score-inpainted").textContent = report.inpainted_score.toFixed(3);
  const deltaEl = el<HTMLSpanElement>("score-delta");
  deltaEl.textContent = `${report.delta >= 0 ? "+" : ""}${report.delta.toFixed(3)}`;
  deltaEl.className = report.delta >= 0 ? "delta up" : "delta down";
}

function renderComparator(): void {
  const visible = session ? comparatorVisible(session.state) : false;
  stateEl.comparator.hidden = !visible || !baseImage || !inpaintedImage;
  if (stateEl.comparator.hidden) return;
  const canvas = stateEl.compareCanvas;
  const ctx = canvas.getContext("2d");
  if (!ctx || !baseImage || !inpaintedImage) return;
  canvas.width = baseImage.naturalWidth;
  canvas.height = baseImage.naturalHeight;
  ctx.drawImage(baseImage, 0, 0);
  const column = wipeColumn(canvas.width, Number(stateEl.compareSlider.value));
  if (column > 0) {
    ctx.save();
    ctx.beginPath();
    ctx.rect(0, 0, column, canvas.height);
    ctx.clip();
    ctx.drawImage(inpaintedImage, 0, 0);
    ctx.restore();
  }
  if (stateEl.outlineToggle.checked && maskBits) {
    const outline = maskOutline(maskBits, canvas.width, canvas.height);
    const overlay = ctx.getImageData(0, 0, canvas.width, canvas.height);
    for (let i = 0; i < outline.length; i++) {
      if (!outline[i]) continue;
      overlay.data[i * 4] = 255;
      overlay.data[i * 4 + 1] = 230;
      overlay.data[i * 4 + 2] = 0;
    }
    ctx.putImageData(overlay, 0, 0);
  }
}

function renderAll(): void {
  renderStepper();
  renderActionButtons();
  renderCanvas();
  renderScore();
  renderComparator();
  el<HTMLSpanElement>("session-id").textContent = session?.session_id ?? "(none)";
}

// ---------------------------------------------------------------------------
// session + stage orchestration
// ---------------------------------------------------------------------------

async function refreshSession(sessionId: string): Promise<void> {
  session = await client.getSession(sessionId);
  if (session.artifacts.initial_image) {
    baseImage = await loadImage(client.imageUrl(sessionId, "initial"));
    if (!maskState || maskState.raster.width !== baseImage.naturalWidth) {
      maskState = new CanvasMaskState(baseImage.naturalWidth, baseImage.naturalHeight);
      bindMaskTools(maskState);
    }
  }
  inpaintedImage = session.artifacts.inpainted_image
    ? await loadImage(client.imageUrl(sessionId, "inpainted"))
    : null;
  if (session.artifacts.mask) {
    maskBits = null; // outline uses the client raster when present
  }
  if (session.prompts.suggested_prompt && !stateEl.refineText.value) {
    stateEl.refineText.value = session.prompts.refined_prompt ?? session.prompts.suggested_prompt;
  }
  window.location.hash = sessionId; // deep-linkable by session id
  renderAll();
}

async function runStage(stage: StageName, submit: () => Promise<{ job_id: string }>): Promise<void> {
  if (!session) return;
  try {
    setStatus(`${stage}: submitting`);
    const handle = await submit();
    await pollJob(client, handle.job_id, {
      onUpdate: (job) => setStatus(`${stage}: ${job.status}`),
    });
    setStatus(`${stage}: done`);
    await refreshSession(session.session_id);
  } catch (error) {
    setStatus(`${stage}: ${(error as Error).message}`, true);
    await refreshSession(session.session_id); // state is unchanged on failure
  }
}

function bindMaskTools(state: CanvasMaskState): void {
  const canvas = stateEl.canvas;
  let dragStart: [number, number] | null = null;

  const canvasPoint = (event: MouseEvent): [number, number] => {
    const rect = canvas.getBoundingClientRect();
    const x = Math.floor(((event.clientX - rect.left) / rect.width) * canvas.width);
    const y = Math.floor(((event.clientY - rect.top) / rect.height) * canvas.height);
    return [x, y];
  };

  canvas.onmousedown = (event) => {
    const [x, y] = canvasPoint(event);
    if (state.tool === "brush" || state.tool === "eraser") {
      state.beginStroke(x, y);
    } else {
      dragStart = [x, y];
    }
    renderCanvas();
  };
  canvas.onmousemove = (event) => {
    if (!state.strokeInProgress) return;
    const [x, y] = canvasPoint(event);
    state.extendStroke(x, y);
    renderCanvas();
  };
  canvas.onmouseup = (event) => {
    const [x, y] = canvasPoint(event);
    if (state.strokeInProgress) {
      state.endStroke();
    } else if (dragStart) {
      if (state.tool === "point") {
        state.applyPoint(x, y);
      } else if (state.tool === "box") {
        state.applyBox(dragStart[0], dragStart[1], x, y);
      }
      dragStart = null;
    }
    renderCanvas();
  };
}

function wireUi(): void {
  el<HTMLButtonElement>("create-session").onclick = async () => {
    const prompt = el<HTMLInputElement>("initial-prompt").value.trim();
    const target = el<HTMLInputElement>("target-description").value.trim();
    if (!prompt || !target) {
      setStatus("prompt and target description are required", true);
      return;
    }
    try {
      const created = await client.createSession(prompt, target);
      stateEl.refineText.value = "";
      await refreshSession(created.session_id);
      setStatus(`session ${created.session_id} created`);
    } catch (error) {
      setStatus((error as Error).message, true);
    }
  };

  el<HTMLButtonElement>("generate").onclick = () =>
    runStage("generate", () => client.runGenerate(session!.session_id));

  el<HTMLButtonElement>("upload-mask").onclick = () => {
    if (!maskState || maskState.raster.area() === 0) {
      setStatus("paint a mask first", true);
      return;
    }
    maskBits = maskState.raster.data.slice();
    void runStage("mask", () => client.uploadMask(session!.session_id, maskState!.exportPng()));
  };

  el<HTMLButtonElement>("refine").onclick = () => {
    const edited = stateEl.refineText.value.trim();
    const suggestion = session?.prompts.suggested_prompt ?? "";
    const userEdit = edited && edited !== suggestion ? edited : undefined;
    void runStage("refine", () => client.runRefine(session!.session_id, userEdit));
  };

  el<HTMLButtonElement>("inpaint").onclick = () =>
    runStage("inpaint", () => client.runInpaint(session!.session_id));

  el<HTMLButtonElement>("score").onclick = () =>
    runStage("score", () => client.runScore(session!.session_id));

  for (const button of document.querySelectorAll<HTMLButtonElement>("[data-tool]")) {
    button.onclick = () => {
      if (!maskState) return;
      maskState.tool = button.dataset.tool as Tool;
      for (const other of document.querySelectorAll("[data-tool]")) {
        other.classList.toggle("active", other === button);
      }
    };
  }
  el<HTMLInputElement>("brush-radius").oninput = (event) => {
    if (maskState) maskState.brushRadius = Number((event.target as HTMLInputElement).value);
  };
  el<HTMLInputElement>("overlay-opacity").oninput = (event) => {
    if (maskState) {
      maskState.overlayOpacity = Number((event.target as HTMLInputElement).value) / 100;
      renderCanvas();
    }
  };
  el<HTMLButtonElement>("clear-mask").onclick = () => {
    maskState?.clear();
    renderCanvas();
  };

  stateEl.compareSlider.oninput = renderComparator;
  stateEl.outlineToggle.onchange = renderComparator;
}

async function boot(): Promise<void> {
  wireUi();
  spec = await client.getSpec();
  const fromHash = window.location.hash.slice(1);
  if (fromHash) {
    try {
      await refreshSession(fromHash);
    } catch {
      setStatus(`session ${fromHash} not found`, true);
    }
  }
  renderAll();
}

void boot();

/**
 * Browser entry point. Plain DOM, no framework: a poll loop fetches question
 * pages, renders up to six letterboxed patch cells with the target label
 * pinned beside them, and submits positional answers. A polygon mode lets a
 * worker trace the object outline instead, for timing comparisons.
 */
import { ApiClient } from "./api.js";
import { PageViewState } from "./pageState.js";
import { MIN_VERTICES, PolygonDraft } from "./polygon.js";
import type { QuestionPage } from "./types.js";

const params = new URLSearchParams(window.location.search);
const workerId = params.get("worker") ?? `anon-${Math.random().toString(36).slice(2, 8)}`;
const api = new ApiClient(params.get("api") ?? "");

const root = document.getElementById("app") as HTMLElement;
let busy = false; // at most one in-flight submission

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function showMessage(title: string, detail: string, retryLabel?: string): void {
  root.replaceChildren();
  const panel = el("div", "panel");
  panel.append(el("h2", undefined, title), el("p", undefined, detail));
  if (retryLabel) {
    const button = el("button", "primary", retryLabel);
    button.addEventListener("click", () => void loadNextPage());
    panel.append(button);
  }
  root.append(panel);
}

function renderPage(page: QuestionPage): void {
  const state = new PageViewState(page);
  root.replaceChildren();

  const instructions = el("aside", "instructions");
  instructions.append(
    el("h2", undefined, `Find the ${page.jobLabel}`),
    el(
      "p",
      undefined,
      `Click every patch that shows part of the ${page.jobLabel}. ` +
        "Selected patches get a blue outline. Click again to unselect.",
    ),
  );

  const grid = el("div", "patch-grid");
  const submit = el("button", "primary", "Submit answers") as HTMLButtonElement;
  submit.disabled = true;

  const refreshSubmit = () => {
    submit.disabled = busy || !state.canSubmit;
  };

  page.tasks.forEach((task, index) => {
    const cell = el("figure", "patch-cell");
    const img = el("img") as HTMLImageElement;
    img.alt = `patch ${index + 1} of ${page.tasks.length}`;
    img.addEventListener("load", () => {
      cell.classList.remove("failed");
      state.markLoaded(index);
      refreshSubmit();
    });
    img.addEventListener("error", () => {
      state.markLoadFailed(index);
      cell.classList.add("failed");
      refreshSubmit();
      const retry = el("button", "retry", "Retry image");
      retry.addEventListener("click", () => {
        retry.remove();
        img.src = `${api.patchUrl(task.taskId)}?retry=${Date.now()}`;
      });
      cell.append(retry);
    });
    cell.addEventListener("click", () => {
      if (!state.fullyLoaded) return;
      const selected = state.toggle(index);
      cell.classList.toggle("selected", selected);
    });
    img.src = api.patchUrl(task.taskId);
    cell.append(img);
    grid.append(cell);
  });

  submit.addEventListener("click", () => {
    if (busy || !state.canSubmit) return;
    busy = true;
    refreshSubmit();
    api
      .submitAnswers(page.pageToken, workerId, state.answers(), state.elapsedMs())
      .then((ack) => {
        busy = false;
        if (ack.validity) {
          showMessage(
            ack.status === "accepted" ? "Assignment accepted" : "Assignment rejected",
            ack.status === "accepted"
              ? "Thanks! Your answers passed the quality checks."
              : "Too many quality-check answers were wrong; this batch was discarded.",
            "Continue",
          );
        } else {
          void loadNextPage();
        }
      })
      .catch((err) => {
        busy = false;
        refreshSubmit();
        showMessage("Submission failed", String(err), "Try again");
      });
  });

  const main = el("section", "page");
  main.append(instructions, grid, submit);
  root.append(main);
}

async function loadNextPage(): Promise<void> {
  showMessage("Loading", "Fetching the next question page.");
  try {
    const page = await api.nextPage(workerId);
    if (page === null) {
      showMessage("All done", "No more questions right now.", "Check again");
      return;
    }
    renderPage(page);
  } catch (err) {
    showMessage("Could not reach the server", String(err), "Retry");
  }
}

function renderPolygonMode(imageId: string, imageUrl: string): void {
  root.replaceChildren();
  const panel = el("section", "page");
  panel.append(
    el("h2", undefined, "Trace the object"),
    el("p", undefined, `Click at least ${MIN_VERTICES} points around the object, then submit.`),
  );

  const canvas = el("canvas", "trace") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d") as CanvasRenderingContext2D;
  const image = new Image();
  let draft: PolygonDraft | null = null;

  const submit = el("button", "primary", "Submit polygon") as HTMLButtonElement;
  const undo = el("button", undefined, "Undo point") as HTMLButtonElement;
  submit.disabled = true;

  const redraw = () => {
    if (!draft) return;
    ctx.drawImage(image, 0, 0);
    ctx.strokeStyle = "#2563eb";
    ctx.fillStyle = "#2563eb";
    ctx.lineWidth = 2;
    const pts = draft.points;
    pts.forEach((p, i) => {
      ctx.beginPath();
      ctx.arc(p.x, p.y, 4, 0, Math.PI * 2);
      ctx.fill();
      if (i > 0) {
        const prev = pts[i - 1] as { x: number; y: number };
        ctx.beginPath();
        ctx.moveTo(prev.x, prev.y);
        ctx.lineTo(p.x, p.y);
        ctx.stroke();
      }
    });
    submit.disabled = busy || !draft.canSubmit;
  };

  image.addEventListener("load", () => {
    canvas.width = image.naturalWidth;
    canvas.height = image.naturalHeight;
    draft = new PolygonDraft(imageId, image.naturalWidth, image.naturalHeight);
    redraw();
  });
  image.src = imageUrl;

  canvas.addEventListener("click", (event) => {
    if (!draft) return;
    const box = canvas.getBoundingClientRect();
    const x = ((event.clientX - box.left) / box.width) * canvas.width;
    const y = ((event.clientY - box.top) / box.height) * canvas.height;
    draft.addVertex(x, y);
    redraw();
  });
  undo.addEventListener("click", () => {
    draft?.undo();
    redraw();
  });
  submit.addEventListener("click", () => {
    if (!draft || busy || !draft.canSubmit) return;
    draft.close();
    busy = true;
    const startedAt = performance.now();
    api
      .submitPolygon(imageId, workerId, draft.toRequestPoints(), performance.now() - startedAt + 1)
      .then(() => {
        busy = false;
        showMessage("Polygon recorded", "Thanks!", "Back to questions");
      })
      .catch((err) => {
        busy = false;
        showMessage("Submission failed", String(err), "Back to questions");
      });
  });

  panel.append(canvas, undo, submit);
  root.append(panel);
}

const polygonImage = params.get("polygon");
if (polygonImage) {
  renderPolygonMode(polygonImage, params.get("imageUrl") ?? `/images/${polygonImage}.png`);
} else {
  void loadNextPage();
}

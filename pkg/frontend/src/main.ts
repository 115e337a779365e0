// DOM wiring: render the session state into #app and translate clicks and
// key presses into session calls. No router, no storage beyond the unsent
// draft held in memory by the session.

import { ApiClient, type Score } from "./api.js";
import { mapKey } from "./keyboard.js";
import { render, renderAnnotatorForm } from "./render.js";
import { AnnotationSession } from "./session.js";

const app = document.getElementById("app");
if (!app) {
  throw new Error("missing #app root element");
}
const root: HTMLElement = app;

const api = new ApiClient("");
let rubric = "";
let rubricOpen = false;
let session: AnnotationSession | null = null;

function paint(): void {
  if (!session) {
    root.innerHTML = renderAnnotatorForm();
    return;
  }
  root.innerHTML = render(session.state, rubric, rubricOpen);
}

function startSession(annotator: string): void {
  session = new AnnotationSession(api, annotator, paint);
  api
    .fetchRubric()
    .then((text) => {
      rubric = text;
      paint();
    })
    .catch(() => {
      rubric = "";
    });
  void session.start();
}

root.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  if (!session) {
    return;
  }
  if (target.matches(".score-btn")) {
    session.choose(Number(target.dataset["score"]) as Score);
  } else if (target.id === "submit-btn") {
    void session.submit();
  } else if (target.id === "retry-btn") {
    void session.retry();
  } else if (target.id === "rubric-toggle") {
    event.preventDefault();
    rubricOpen = !rubricOpen;
    paint();
  }
});

root.addEventListener("submit", (event) => {
  const form = event.target as HTMLFormElement;
  if (form.id === "annotator-form") {
    event.preventDefault();
    const input = form.querySelector<HTMLInputElement>("#annotator-input");
    const annotator = input?.value.trim();
    if (annotator) {
      startSession(annotator);
    }
  }
});

document.addEventListener("keydown", (event) => {
  if (!session || session.state.phase !== "judging") {
    return;
  }
  const active = document.activeElement;
  if (active instanceof HTMLInputElement || active instanceof HTMLTextAreaElement) {
    return;
  }
  const action = mapKey(event.key);
  if (!action) {
    return;
  }
  event.preventDefault();
  if (action.kind === "choose") {
    session.choose(action.score);
  } else {
    void session.submit();
  }
});

const params = new URLSearchParams(window.location.search);
const annotatorParam = params.get("annotator");
if (annotatorParam) {
  startSession(annotatorParam);
} else {
  paint();
}

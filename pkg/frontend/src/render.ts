// Pure HTML-string renderers. Only whitelisted TaskView fields ever reach
// the DOM, so automated scores cannot leak into a rendered view no matter
// what a payload contains.

import type { Progress, Score } from "./api.js";
import type { SessionState } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

const SCORE_LABELS: Record<Score, string> = {
  0: "0 · not relevant",
  1: "1 · little relevance",
  2: "2 · middle relevance",
  3: "3 · strong relevance",
};

function renderScoreButtons(selected: Score | null, submitting: boolean): string {
  const buttons = ([0, 1, 2, 3] as Score[])
    .map((score) => {
      const pressed = selected === score ? " selected" : "";
      const disabled = submitting ? " disabled" : "";
      return (
        `<button class="score-btn${pressed}" data-score="${score}"` +
        `${disabled} aria-pressed="${selected === score}">` +
        `${SCORE_LABELS[score]}</button>`
      );
    })
    .join("");
  const submitDisabled = selected === null || submitting ? " disabled" : "";
  return (
    `<div class="score-row" role="group" aria-label="relevance">${buttons}</div>` +
    `<button id="submit-btn" class="submit-btn"${submitDisabled}>` +
    `${submitting ? "Submitting…" : "Submit (Enter)"}</button>`
  );
}

function renderErrorBanner(message: string | null): string {
  if (!message) {
    return "";
  }
  return (
    `<div class="error-banner" role="alert">${escapeHtml(message)} ` +
    `<button id="retry-btn">Retry</button></div>`
  );
}

export function renderLoading(state: SessionState): string {
  return `${renderErrorBanner(state.error)}<main class="loading"><p>Loading next pair…</p></main>`;
}

export function renderJudging(state: SessionState, rubric: string, rubricOpen: boolean): string {
  const task = state.task;
  if (!task) {
    return renderLoading(state);
  }
  const funcloc = task.funcloc === null ? "unknown" : task.funcloc;
  const rubricPanel = rubricOpen
    ? `<div class="rubric-body">${escapeHtml(rubric)}</div>`
    : "";
  return (
    renderErrorBanner(state.error) +
    `<main class="judging">` +
    `<header class="progress-line">Pair ${task.position} of ${task.total}</header>` +
    `<section class="query-card"><h2>Query</h2><p class="query-text">${escapeHtml(task.query)}</p></section>` +
    `<section class="doc-card"><h2>Log entry</h2>` +
    `<p class="doc-text">${escapeHtml(task.text)}</p>` +
    `<p class="funcloc">Machinery: <span>${escapeHtml(funcloc)}</span></p></section>` +
    `<section class="scoring">${renderScoreButtons(state.selected, state.submitting)}</section>` +
    `<details class="rubric"${rubricOpen ? " open" : ""}><summary id="rubric-toggle">Scoring guidance</summary>${rubricPanel}</details>` +
    `<footer class="hints">Keys: 0–3 select a grade, Enter submits.</footer>` +
    `</main>`
  );
}

export function renderDone(progress: Progress | null): string {
  const histogram = progress?.histogram ?? {};
  const rows = ["0", "1", "2", "3"]
    .map(
      (grade) =>
        `<tr><td>${grade}</td><td>${Number(histogram[grade] ?? 0)}</td></tr>`,
    )
    .join("");
  const judged = progress?.judged ?? 0;
  return (
    `<main class="done"><h1>All done</h1>` +
    `<p>You judged ${judged} pairs. Thank you!</p>` +
    `<table class="histogram"><thead><tr><th>Grade</th><th>Count</th></tr></thead>` +
    `<tbody>${rows}</tbody></table></main>`
  );
}

export function render(state: SessionState, rubric: string, rubricOpen: boolean): string {
  switch (state.phase) {
    case "loading":
      return renderLoading(state);
    case "judging":
      return renderJudging(state, rubric, rubricOpen);
    case "done":
      return renderDone(state.progress);
  }
}

export function renderAnnotatorForm(): string {
  return (
    `<main class="gate"><h1>Relevance annotation</h1>` +
    `<form id="annotator-form"><label>Annotator id ` +
    `<input id="annotator-input" name="annotator" required minlength="1" autofocus></label>` +
    `<button type="submit">Start</button></form></main>`
  );
}

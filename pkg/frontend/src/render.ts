/** DOM rendering for the console.
 *
 * The scaffold (form, knob inputs) is built once so typing focus survives
 * updates; the output regions (banner, results, case detail, insight,
 * timings) are re-rendered from state on every change. All numbers printed
 * here are API values formatted for display; factor bars scale the same
 * value into a width, with the raw number printed beside the bar.
 */

import type { ConsoleController } from "./controller";
import { boundsFor } from "./knobs";
import {
  highlightSentences,
  toInsightView,
  toRowView,
  type RowView,
} from "./viewmodel";
import type { SearchKnobs } from "./types";

const KNOB_LABELS: Record<keyof SearchKnobs, string> = {
  k: "pool size k",
  n: "results n",
  mmr_lambda: "diversity λ",
  w_similarity: "similarity weight",
  w_recency: "recency weight",
  w_citation: "citation weight",
  w_jurisdiction: "jurisdiction weight",
};

const KNOB_STEPS: Record<keyof SearchKnobs, string> = {
  k: "1",
  n: "1",
  mmr_lambda: "0.05",
  w_similarity: "0.05",
  w_recency: "0.05",
  w_citation: "0.05",
  w_jurisdiction: "0.05",
};

function esc(raw: string): string {
  return raw
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

function fmt(value: number): string {
  return value.toFixed(4);
}

function knobInput(name: keyof SearchKnobs, value: number): string {
  const bound = boundsFor(name);
  return `
    <label class="knob">
      <span>${esc(KNOB_LABELS[name])}</span>
      <input type="number" name="${name}" value="${value}"
             min="${bound.min}" max="${bound.max}" step="${KNOB_STEPS[name]}">
    </label>`;
}

export function mountConsole(root: HTMLElement, controller: ConsoleController): void {
  const knobs = controller.state.knobs;
  root.innerHTML = `
    <header>
      <h1>case console</h1>
    </header>
    <form id="search-form">
      <input id="query" type="search" placeholder="describe the situation…"
             autocomplete="off">
      <button id="search-btn" type="submit">search</button>
      <button id="insight-btn" type="button" disabled>insight report</button>
    </form>
    <fieldset id="knobs">
      ${(Object.keys(KNOB_LABELS) as (keyof SearchKnobs)[])
        .map((name) => knobInput(name, knobs[name]))
        .join("")}
    </fieldset>
    <ul id="violations"></ul>
    <div id="banner" hidden></div>
    <main>
      <section id="results"></section>
      <aside id="detail"></aside>
    </main>
    <section id="insight"></section>
    <footer id="timings"></footer>
  `;

  const form = root.querySelector<HTMLFormElement>("#search-form")!;
  const queryInput = root.querySelector<HTMLInputElement>("#query")!;
  const insightBtn = root.querySelector<HTMLButtonElement>("#insight-btn")!;

  queryInput.addEventListener("input", () => {
    controller.setQuery(queryInput.value);
  });
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void controller.runSearch();
  });
  insightBtn.addEventListener("click", () => {
    void controller.runInsight();
  });
  for (const input of root.querySelectorAll<HTMLInputElement>("#knobs input")) {
    input.addEventListener("input", () => {
      controller.setKnob(
        input.name as keyof SearchKnobs,
        input.valueAsNumber,
      );
    });
  }
  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement | null;
    const rowEl = target?.closest<HTMLElement>("[data-case-id]");
    if (rowEl && rowEl.dataset.caseId) {
      controller.selectCase(rowEl.dataset.caseId);
    }
  });

  controller.subscribe(() => renderDynamic(root, controller));
  renderDynamic(root, controller);
}

function factorBars(row: RowView): string {
  return row.factors
    .map(
      (factor) => `
      <div class="factor">
        <span class="factor-name">${esc(factor.name)}</span>
        <span class="bar"><span class="bar-fill" style="width:${factor.value * 100}%"></span></span>
        <span class="factor-value">${fmt(factor.value)}</span>
      </div>`,
    )
    .join("");
}

function resultRow(row: RowView, selected: boolean): string {
  return `
    <article class="result-row${selected ? " selected" : ""}" data-case-id="${esc(row.id)}">
      <div class="row-head">
        <span class="rank">#${row.rank}</span>
        <span class="case-id">${esc(row.id)}</span>
        <span class="title">${esc(row.title)}</span>
      </div>
      <div class="row-scores">
        <span class="cosine">cosine ${fmt(row.cosine)}</span>
        <span class="final">final ${fmt(row.finalScore)}</span>
      </div>
      ${factorBars(row)}
    </article>`;
}

export function renderDynamic(root: HTMLElement, controller: ConsoleController): void {
  const state = controller.state;

  const banner = root.querySelector<HTMLElement>("#banner")!;
  if (state.banner) {
    banner.hidden = false;
    banner.className = `banner ${state.banner.kind}`;
    banner.textContent = state.banner.text;
  } else {
    banner.hidden = true;
    banner.textContent = "";
  }

  const violations = root.querySelector<HTMLElement>("#violations")!;
  violations.innerHTML = state.knobViolations
    .map((violation) => `<li class="violation">${esc(violation.message)}</li>`)
    .join("");

  const searchBtn = root.querySelector<HTMLButtonElement>("#search-btn")!;
  searchBtn.disabled = state.searchInFlight || state.knobViolations.length > 0;
  const insightBtn = root.querySelector<HTMLButtonElement>("#insight-btn")!;
  insightBtn.disabled = !controller.canRequestInsight();

  const results = root.querySelector<HTMLElement>("#results")!;
  results.innerHTML = state.rows
    .map((row) => resultRow(toRowView(row), row.id === state.selectedId))
    .join("");

  const detail = root.querySelector<HTMLElement>("#detail")!;
  const selected = state.rows.find((row) => row.id === state.selectedId);
  if (selected && state.completedQuery !== null) {
    const sentences = highlightSentences(selected.body, state.completedQuery)
      .map((sentence) =>
        sentence.matched
          ? `<mark>${esc(sentence.text)}</mark>`
          : esc(sentence.text),
      )
      .join(" ");
    detail.innerHTML = `
      <h2>${esc(selected.title)}</h2>
      <p class="case-body">${sentences}</p>`;
  } else {
    detail.innerHTML = "";
  }

  renderInsight(root, controller);

  const timings = root.querySelector<HTMLElement>("#timings")!;
  timings.innerHTML = Object.entries(state.timings)
    .map(
      ([stage, seconds]) =>
        `<span class="timing">${esc(stage)} ${(seconds * 1000).toFixed(1)}ms</span>`,
    )
    .join("");
}

function renderInsight(root: HTMLElement, controller: ConsoleController): void {
  const container = root.querySelector<HTMLElement>("#insight")!;
  const insight = controller.state.insight;
  if (!insight) {
    container.innerHTML = controller.state.insightInFlight
      ? `<p class="insight-pending">generating…</p>`
      : "";
    return;
  }
  const view = toInsightView(insight);
  const segments = view.segments
    .map((segment) =>
      segment.kind === "text"
        ? esc(segment.text)
        : `<a class="citation-link${segment.resolved ? "" : " unresolved"}"
             data-case-id="${esc(segment.caseId)}" href="#case-${esc(segment.caseId)}"
             title="${segment.resolved ? "open case" : "citation not in retrieved set"}"
           >[${esc(segment.caseId)}]</a>`,
    )
    .join("");
  const badges = view.badges
    .map(
      (badge) => `
      <li class="badge ${badge.state}">
        <span class="badge-state">${badge.state}</span>
        <span class="badge-sentence">${esc(badge.sentence)}</span>
      </li>`,
    )
    .join("");
  const stripped = view.strippedSentences
    .map((sentence) => `<li class="stripped">${esc(sentence)}</li>`)
    .join("");
  container.innerHTML = `
    <div class="insight-status ${view.status}">
      ${esc(view.statusLabel)} · rounds used: ${view.roundsUsed}
      ${view.failureReason ? ` · ${esc(view.failureReason)}` : ""}
    </div>
    <p class="insight-text">${segments}</p>
    <ul class="badges">${badges}</ul>
    ${stripped ? `<h3>stripped sentences</h3><ul class="stripped-list">${stripped}</ul>` : ""}
  `;
}

/**
 * DOM rendering: three views (model upload, case list, case detail) plus a
 * shared banner. The whole view re-renders after every action; displayed
 * numbers are formatted from served values and nothing else.
 */

import type { App } from "./app.js";
import {
  STATE_COLORS,
  drawChart,
  nearestPoint,
  probabilitySeries,
  scoreSeries,
  tFromPixel,
} from "./charts.js";
import type { TimelinePoint } from "./api.js";

const PROB_DIGITS = 4;
const SCORE_DIGITS = 3;

function esc(text: string): string {
  const div = document.createElement("div");
  div.textContent = text;
  return div.innerHTML;
}

function fmtProb(value: number | undefined): string {
  return value === undefined ? "" : value.toFixed(PROB_DIGITS);
}

function fmtRho(value: number | string | undefined): string {
  if (value === undefined) return "";
  return typeof value === "string" ? value : value.toFixed(SCORE_DIGITS);
}

export function render(root: HTMLElement, app: App): void {
  const bannerHtml = app.banner
    ? `<div id="banner" class="banner ${app.banner.kind}">${esc(app.banner.text)}` +
      (app.stale ? ` <span id="stale-flag">[stale]</span>` : "") +
      `</div>`
    : "";
  root.innerHTML = `
    <header>
      <h1>escalate console</h1>
      <nav>
        <button id="nav-cases">cases</button>
        <button id="nav-models">models</button>
        <span id="api-base">${esc(app.client.baseUrl)}</span>
      </nav>
    </header>
    ${bannerHtml}
    <main id="view"></main>
  `;
  root.querySelector("#nav-cases")!.addEventListener("click", () => void app.showCases());
  root.querySelector("#nav-models")!.addEventListener("click", () => void app.showModels());

  const view = root.querySelector<HTMLElement>("#view")!;
  if (app.view === "models") renderModels(view, app);
  else if (app.view === "cases") renderCases(view, app);
  else renderCase(view, app);
}

function renderModels(view: HTMLElement, app: App): void {
  view.innerHTML = `
    <section>
      <h2>register a model</h2>
      <textarea id="model-json" rows="10" cols="80" placeholder="paste a model document (JSON)"></textarea>
      <div>
        <button id="model-register">register</button>
        <span id="register-error" class="inline-error">${esc(app.registerError)}</span>
      </div>
    </section>
    <section>
      <h2>registered models</h2>
      <ul id="model-list">
        ${app.models
          .map(
            (m) => `
          <li class="model-row" data-model="${esc(m.model_id)}">
            <code>${esc(m.model_id)}</code> ${esc(m.label || "(unlabelled)")}
            | states: ${esc(m.states.join(", "))}
            <button class="model-open" data-model="${esc(m.model_id)}">new case</button>
          </li>`,
          )
          .join("")}
      </ul>
    </section>
  `;
  view.querySelector("#model-register")!.addEventListener("click", () => {
    const text = view.querySelector<HTMLTextAreaElement>("#model-json")!.value;
    void app.registerModel(text);
  });
  for (const button of view.querySelectorAll<HTMLButtonElement>(".model-open")) {
    button.addEventListener("click", () => void app.createCase(button.dataset.model!));
  }
}

function renderCases(view: HTMLElement, app: App): void {
  view.innerHTML = `
    <section>
      <h2>open cases</h2>
      <table id="case-list">
        <thead><tr><th>case</th><th>model</th><th>opened</th><th>t</th><th>score</th><th></th></tr></thead>
        <tbody>
          ${app.cases
            .map(
              (c) => `
            <tr class="case-row" data-case="${esc(c.case_id)}">
              <td><code>${esc(c.case_id)}</code></td>
              <td><code>${esc(c.model_id)}</code></td>
              <td>${esc(c.created)}</td>
              <td>${c.t}</td>
              <td>${typeof c.score === "number" ? c.score.toFixed(SCORE_DIGITS) : esc(String(c.score))}</td>
              <td><button class="case-open" data-case="${esc(c.case_id)}">open</button></td>
            </tr>`,
            )
            .join("")}
        </tbody>
      </table>
      <p>${app.cases.length === 0 ? "no cases yet: register a model and start one" : ""}</p>
    </section>
  `;
  for (const button of view.querySelectorAll<HTMLButtonElement>(".case-open")) {
    button.addEventListener("click", () => void app.openCase(button.dataset.case!));
  }
}

function renderCase(view: HTMLElement, app: App): void {
  const cv = app.current;
  if (!cv) {
    view.innerHTML = "<p>no case open</p>";
    return;
  }
  const latest = cv.timeline[cv.timeline.length - 1];
  view.innerHTML = `
    <section>
      <h2>case <code>${esc(cv.caseId)}</code>: ${esc(cv.label)}</h2>
      <canvas id="chart" width="720" height="260"></canvas>
      <div id="chart-legend">
        ${cv.states
          .map(
            (sid, i) =>
              `<span class="legend-item" style="color:${STATE_COLORS[i % STATE_COLORS.length]}">&#9632; ${esc(sid)}</span>`,
          )
          .join(" ")}
        <span class="legend-item">&#9632; score</span>
        ${cv.preview ? '<span id="wi-note" class="preview-note">dashed: what-if preview (not committed)</span>' : ""}
      </div>
      <div id="hover-readout">hover the chart for exact served values</div>
      <h3>latest posterior (t = ${latest.t})${latest.flat_evidence ? " (flat evidence period)" : ""}</h3>
      <table id="latest-table">
        <thead><tr><th>state</th><th>posterior</th><th>log-odds vs ${esc(cv.states[0])}</th></tr></thead>
        <tbody>
          ${cv.states
            .map(
              (sid) => `
            <tr>
              <td>${esc(sid)}</td>
              <td class="cell-p" id="cell-p-${esc(sid)}">${fmtProb(latest.posterior[sid])}</td>
              <td id="cell-rho-${esc(sid)}">${sid === cv.states[0] ? "" : fmtRho(latest.rho[sid])}</td>
            </tr>`,
            )
            .join("")}
        </tbody>
      </table>
      <p>position score: <span id="score-cell">${latest.score.toFixed(SCORE_DIGITS)}</span>
         over ${cv.timeline.length} timeline point(s)</p>
    </section>

    <section class="entry-forms">
      <div>
        <h3>weekly observation</h3>
        <label>period t <input id="obs-t" type="number" step="any" value="${app.nextT()}"></label>
        <div id="obs-values">
          ${cv.observables
            .map(
              (o) => `
            <label class="obs-field">${esc(o.name)}
              <input class="obs-val" id="obs-val-${esc(o.id)}" data-obs="${esc(o.id)}" type="number" step="any" placeholder="missing">
            </label>`,
            )
            .join("")}
        </div>
        <button id="obs-submit">submit observation</button>
        <span id="obs-error" class="inline-error">${esc(cv.obsError)}</span>
      </div>

      <div>
        <h3>direct evidence</h3>
        <label>period t <input id="ev-t" type="number" step="any" value="${app.nextT()}"></label>
        <label>task
          <select id="ev-task">
            ${cv.tasks.map((t) => `<option value="${esc(t.id)}">${esc(t.name)}</option>`).join("")}
          </select>
        </label>
        <label>observed value
          <select id="ev-value"><option value="1">1 (enacted)</option><option value="0">0 (not enacted)</option></select>
        </label>
        <label>note <input id="ev-note" type="text" placeholder="provenance"></label>
        <button id="ev-submit">commit evidence</button>
        <span id="ev-error" class="inline-error">${esc(cv.evError)}</span>
      </div>

      <div>
        <h3>what-if (preview only)</h3>
        <label>period t <input id="wi-t" type="number" step="any" value="${app.nextT()}"></label>
        <label>task
          <select id="wi-task">
            ${cv.tasks.map((t) => `<option value="${esc(t.id)}">${esc(t.name)}</option>`).join("")}
          </select>
        </label>
        <label>value
          <select id="wi-value"><option value="1">1</option><option value="0">0</option></select>
        </label>
        <button id="wi-add">add to draft</button>
        <ul id="wi-rows">
          ${cv.draft
            .map((r) => `<li>t=${r.t}: ${esc(JSON.stringify(r.tasks))}</li>`)
            .join("")}
        </ul>
        <button id="wi-preview">preview</button>
        <button id="wi-discard">discard draft</button>
        <span id="wi-error" class="inline-error">${esc(cv.wiError)}</span>
      </div>
    </section>
  `;

  const canvas = view.querySelector<HTMLCanvasElement>("#chart")!;
  const committed = [
    ...probabilitySeries(cv.timeline, cv.states),
    scoreSeries(cv.timeline),
  ];
  const overlay = cv.preview
    ? [...probabilitySeries(cv.preview, cv.states, true), scoreSeries(cv.preview, true)]
    : [];
  const scale = drawChart(canvas, [...committed, ...overlay]);

  canvas.addEventListener("mousemove", (event) => {
    const rect = canvas.getBoundingClientRect();
    const t = tFromPixel(scale, event.clientX - rect.left);
    const point = nearestPoint(cv.timeline, t);
    if (!point) return;
    const cells = cv.states.map((sid) => `${sid}=${fmtProb(point.posterior[sid])}`).join(" ");
    view.querySelector("#hover-readout")!.textContent =
      `t=${point.t}: ${cells} score=${point.score.toFixed(SCORE_DIGITS)}`;
  });

  view.querySelector("#obs-submit")!.addEventListener("click", () => {
    const t = Number(view.querySelector<HTMLInputElement>("#obs-t")!.value);
    const values: Record<string, number> = {};
    for (const input of view.querySelectorAll<HTMLInputElement>(".obs-val")) {
      if (input.value.trim() !== "") values[input.dataset.obs!] = Number(input.value);
    }
    void app.submitObservation(t, values);
  });

  view.querySelector("#ev-submit")!.addEventListener("click", () => {
    const t = Number(view.querySelector<HTMLInputElement>("#ev-t")!.value);
    const task = view.querySelector<HTMLSelectElement>("#ev-task")!.value;
    const value = Number(view.querySelector<HTMLSelectElement>("#ev-value")!.value);
    const note = view.querySelector<HTMLInputElement>("#ev-note")!.value;
    void app.submitEvidence(t, { [task]: value }, note);
  });

  view.querySelector("#wi-add")!.addEventListener("click", () => {
    const t = Number(view.querySelector<HTMLInputElement>("#wi-t")!.value);
    const task = view.querySelector<HTMLSelectElement>("#wi-task")!.value;
    const value = Number(view.querySelector<HTMLSelectElement>("#wi-value")!.value);
    app.addDraftRow(t, task, value);
  });
  view.querySelector("#wi-preview")!.addEventListener("click", () => void app.previewWhatIf());
  view.querySelector("#wi-discard")!.addEventListener("click", () => app.discardWhatIf());
}

export function latestRendered(root: HTMLElement, stateIds: string[]): Record<string, number> {
  const out: Record<string, number> = {};
  for (const sid of stateIds) {
    const cell = root.querySelector(`#cell-p-${sid}`);
    if (cell?.textContent) out[sid] = Number(cell.textContent);
  }
  return out;
}

export type { TimelinePoint };

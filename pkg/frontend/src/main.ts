/** Browser console for the labeling oracle: one query at a time, server-authoritative metrics. */

import { ApiError, BudgetExhausted, SessionClient, StaleQuery } from "./api.js";
import type { QueryView } from "./api.js";
import { renderChartSvg } from "./chart.js";
import {
  SessionView,
  beginSubmit,
  initialView,
  withBanner,
  withCompletion,
  withMetrics,
  withQuery,
  withStaleQuery,
} from "./state.js";
import { SortKey, escapeHtml, formatValue, renderFeatureTable } from "./table.js";

const client = new SessionClient("");
let view: SessionView | null = null;
let sort: { key: SortKey; descending: boolean } = { key: "name", descending: false };

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function labelNames(query: QueryView): string[] {
  if (query.class_names) return query.class_names;
  const n = Math.max(2, query.predicted_label + 1);
  return Array.from({ length: n }, (_, i) => `class ${i}`);
}

function render(): void {
  const app = el<HTMLDivElement>("app");
  if (view === null) return;
  const v = view;
  const header = `
    <div class="statusbar">
      <span>step <strong>${v.step}</strong> / ${v.budget}</span>
      <span>errors found <strong>${v.errorsFound}</strong></span>
      <span>SDR <strong>${v.sdr === null ? "–" : v.sdr.toFixed(3)}</strong></span>
      ${v.lastWasError ? '<span class="badge error-badge">misclassification found</span>' : ""}
    </div>`;
  const chart = `<div class="chart">${renderChartSvg(v.sdrHistory)}</div>`;

  if (v.phase === "complete") {
    app.innerHTML = `
      ${header}
      <div class="panel complete">
        <h2>Session complete</h2>
        <p>${v.errorsFound} error${v.errorsFound === 1 ? "" : "s"} in ${v.step} queries.
           Final SDR: <strong>${v.sdr === null ? "–" : v.sdr.toFixed(3)}</strong>
           (1 means errors arrived exactly at the expected rate).</p>
      </div>
      ${chart}`;
    return;
  }

  const banner = v.banner
    ? `<div class="banner">${escapeHtml(v.banner)} <button id="retry">retry</button></div>`
    : "";

  let queryPanel = '<div class="panel"><p>loading query…</p></div>';
  if (v.query) {
    const q = v.query;
    const names = labelNames(q);
    const buttons = names
      .map(
        (name, i) =>
          `<button class="label-btn" data-label="${i}" ${v.phase === "submitting" ? "disabled" : ""}>
             ${escapeHtml(name)}${i === q.predicted_label ? " (predicted)" : ""}
           </button>`,
      )
      .join("");
    queryPanel = `
      <div class="panel">
        <h2>Instance #${q.index}</h2>
        <p>predicted <strong>${escapeHtml(names[q.predicted_label] ?? String(q.predicted_label))}</strong>
           at confidence <strong>${q.confidence.toFixed(4)}</strong>
           ${q.gad !== null ? `· adversarial-distance score ${formatValue(q.gad)}` : ""}</p>
        ${renderFeatureTable(q.feature_names, q.features, sort.key, sort.descending)}
        <div class="label-controls">
          <p>True class?</p>
          ${buttons}
        </div>
      </div>`;
  }
  app.innerHTML = `${header}${banner}${queryPanel}${chart}`;

  for (const btn of Array.from(document.querySelectorAll<HTMLButtonElement>(".label-btn"))) {
    btn.addEventListener("click", () => submit(parseInt(btn.dataset.label ?? "0", 10)));
  }
  for (const th of Array.from(document.querySelectorAll<HTMLTableCellElement>("th[data-sort]"))) {
    th.addEventListener("click", () => {
      const key = (th.dataset.sort ?? "name") as SortKey;
      sort = { key, descending: sort.key === key ? !sort.descending : false };
      render();
    });
  }
  const retry = document.getElementById("retry");
  if (retry) retry.addEventListener("click", () => void advance());
}

async function advance(): Promise<void> {
  if (view === null) return;
  try {
    const query = await client.fetchNext(view.sessionId);
    view = withQuery(view, query);
  } catch (e) {
    if (e instanceof BudgetExhausted) {
      const metrics = await client.getMetrics(view.sessionId);
      view = withCompletion(withMetrics(view, metrics));
    } else {
      view = withBanner(view, e instanceof ApiError ? e.message : "cannot reach the server");
    }
  }
  render();
}

async function submit(label: number): Promise<void> {
  if (view === null || view.query === null) return;
  const next = beginSubmit(view);
  if (next === null) return; // duplicate click for this step
  view = next;
  render();
  const index = view.query!.index;
  try {
    const metrics = await client.submitLabel(view.sessionId, index, label);
    view = withMetrics(view, metrics, label);
    render();
    if (view.phase !== "complete") await advance();
    else render();
  } catch (e) {
    if (e instanceof StaleQuery) {
      view = withStaleQuery(view);
      await advance();
    } else {
      view = withBanner(view, e instanceof ApiError ? e.message : "cannot reach the server");
      render();
    }
  }
}

async function startSession(config: Record<string, unknown>): Promise<void> {
  const sessionId = await client.createSession(config);
  window.location.hash = sessionId;
  view = initialView(sessionId, (config.budget as number) ?? 0);
  await advance();
}

async function resumeSession(sessionId: string): Promise<void> {
  const metrics = await client.getMetrics(sessionId);
  view = withMetrics(initialView(sessionId, metrics.budget), metrics);
  if (metrics.step >= metrics.budget) view = withCompletion(view);
  else await advance();
  render();
}

function wireSetupForm(): void {
  const form = el<HTMLFormElement>("setup");
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const data = new FormData(form);
    const config: Record<string, unknown> = {
      pool: data.get("pool"),
      predictions: data.get("predictions"),
      method: data.get("method"),
      budget: parseInt(String(data.get("budget")), 10),
      class_of_interest: parseInt(String(data.get("class_of_interest")), 10),
    };
    const gad = String(data.get("gad") ?? "").trim();
    if (gad) config.gad = gad;
    const classNames = String(data.get("class_names") ?? "").trim();
    if (classNames) config.class_names = classNames.split(",").map((s) => s.trim());
    el<HTMLDivElement>("setup-wrap").style.display = "none";
    startSession(config).catch((e) => {
      view = withBanner(initialView("", 0), String(e));
      render();
    });
  });
}

export function boot(): void {
  wireSetupForm();
  const fromHash = window.location.hash.replace(/^#/, "");
  if (fromHash) {
    el<HTMLDivElement>("setup-wrap").style.display = "none";
    void resumeSession(fromHash);
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}

/**
 * Headless session driver: replays a full labeling session against a live
 * server through the same client the browser UI uses, answering every
 * query from a ground-truth label file.
 *
 *   node dist/js/scripted.js <base_url> <config.json> <labels.json> [out.json]
 *
 * labels.json holds one integer label per pool row, row-aligned. The
 * emitted document records the SDR the UI would have displayed after every
 * submission (all values server-attributed).
 */

import { readFileSync, writeFileSync } from "node:fs";
import { BudgetExhausted, SessionClient } from "./api.js";
import { beginSubmit, initialView, withMetrics, withQuery } from "./state.js";

interface StepRecord {
  step: number;
  index: number;
  displayed_sdr: number | null;
  errors_found: number;
}

export async function runScriptedSession(
  baseUrl: string,
  config: Record<string, unknown>,
  labels: number[],
): Promise<{ sessionId: string; steps: StepRecord[]; final: unknown }> {
  const client = new SessionClient(baseUrl);
  const sessionId = await client.createSession(config);
  let view = initialView(sessionId, (config.budget as number) ?? 0);
  const steps: StepRecord[] = [];
  for (;;) {
    let query;
    try {
      query = await client.fetchNext(sessionId);
    } catch (e) {
      if (e instanceof BudgetExhausted) break;
      throw e;
    }
    view = withQuery(view, query);
    const submitting = beginSubmit(view);
    if (submitting === null) throw new Error("state machine refused a submission");
    view = submitting;
    const label = labels[query.index];
    if (label === undefined) throw new Error(`no ground-truth label for index ${query.index}`);
    const metrics = await client.submitLabel(sessionId, query.index, label);
    view = withMetrics(view, metrics, label);
    steps.push({
      step: metrics.step,
      index: query.index,
      displayed_sdr: view.sdr,
      errors_found: view.errorsFound,
    });
    if (view.phase === "complete") break;
  }
  const final = await client.getMetrics(sessionId);
  return { sessionId, steps, final };
}

async function main(): Promise<void> {
  const [baseUrl, configPath, labelsPath, outPath] = process.argv.slice(2);
  if (!baseUrl || !configPath || !labelsPath) {
    console.error("usage: scripted.js <base_url> <config.json> <labels.json> [out.json]");
    process.exit(2);
  }
  const config = JSON.parse(readFileSync(configPath, "utf-8"));
  const labels = JSON.parse(readFileSync(labelsPath, "utf-8")) as number[];
  const result = await runScriptedSession(baseUrl, config, labels);
  const doc = JSON.stringify(result, null, 2);
  if (outPath) writeFileSync(outPath, doc);
  else console.log(doc);
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("scripted.js")) {
  main().catch((e) => {
    console.error(e);
    process.exit(1);
  });
}

import { describe, expect, it } from "vitest";

import type { MetricsSnapshot, QueryView } from "../src/api.js";
import {
  beginSubmit,
  initialView,
  withBanner,
  withMetrics,
  withQuery,
  withStaleQuery,
} from "../src/state.js";

const query: QueryView = {
  index: 7,
  features: [0.1, -2.5],
  feature_names: ["f0", "f1"],
  predicted_label: 1,
  confidence: 0.8,
  gad: -0.4,
  step: 1,
  budget: 10,
  class_names: ["neg", "pos"],
};

function metrics(step: number, overrides: Partial<MetricsSnapshot> = {}): MetricsSnapshot {
  return {
    step,
    errors_found: 1,
    sdr: 5.0,
    sdr_curve: Array.from({ length: step }, (_, i) => i + 1),
    budget: 10,
    status: "active",
    ...overrides,
  };
}

describe("session state", () => {
  it("starts idle with an empty history", () => {
    const v = initialView("abc", 10);
    expect(v.phase).toBe("idle");
    expect(v.sdrHistory).toEqual([]);
    expect(v.sdr).toBeNull();
  });

  it("shows a served query and enables labeling", () => {
    const v = withQuery(initialView("abc", 10), query);
    expect(v.phase).toBe("awaiting-label");
    expect(v.query?.index).toBe(7);
  });

  it("adopts server metrics verbatim without recomputation", () => {
    let v = withQuery(initialView("abc", 10), query);
    v = withMetrics(v, metrics(1, { sdr: 5.0 }), 0);
    expect(v.sdr).toBe(5.0);
    expect(v.sdrHistory).toEqual([1]);
    expect(v.errorsFound).toBe(1);
  });

  it("marks a discovered misclassification", () => {
    let v = withQuery(initialView("abc", 10), query);
    v = withMetrics(v, metrics(1), 0); // label 0 vs predicted 1
    expect(v.lastWasError).toBe(true);
    v = withQuery(v, { ...query, step: 2 });
    v = withMetrics(v, metrics(2), 1); // agreeing label
    expect(v.lastWasError).toBe(false);
  });

  it("blocks a second submission of the same step", () => {
    const v = withQuery(initialView("abc", 10), query);
    const first = beginSubmit(v);
    expect(first).not.toBeNull();
    const second = beginSubmit(first!);
    expect(second).toBeNull();
  });

  it("completes when the budget is spent", () => {
    let v = withQuery(initialView("abc", 10), { ...query, step: 10 });
    v = withMetrics(v, metrics(10), 1);
    expect(v.phase).toBe("complete");
  });

  it("recovers from a stale query by clearing the displayed one", () => {
    let v = withQuery(initialView("abc", 10), query);
    v = withStaleQuery(v);
    expect(v.query).toBeNull();
    expect(v.phase).toBe("querying");
  });

  it("keeps the banner until the next successful fetch", () => {
    let v = withBanner(initialView("abc", 10), "cannot reach the server");
    expect(v.phase).toBe("error");
    v = withQuery(v, query);
    expect(v.banner).toBeNull();
  });
});

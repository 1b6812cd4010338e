/**
 * Pure session-view state. The reducer functions are the only place state
 * changes, which keeps the display logic testable without a DOM.
 */

import type { MetricsSnapshot, QueryView } from "./api.js";

export type Phase = "idle" | "querying" | "awaiting-label" | "submitting" | "complete" | "error";

export interface SessionView {
  sessionId: string;
  phase: Phase;
  query: QueryView | null;
  step: number;
  budget: number;
  errorsFound: number;
  sdr: number | null;
  sdrHistory: number[];
  lastWasError: boolean | null;
  banner: string | null;
  /** step number of the in-flight label submission; blocks duplicates */
  pendingStep: number | null;
}

export function initialView(sessionId: string, budget: number): SessionView {
  return {
    sessionId,
    phase: "idle",
    query: null,
    step: 0,
    budget,
    errorsFound: 0,
    sdr: null,
    sdrHistory: [],
    lastWasError: null,
    banner: null,
    pendingStep: null,
  };
}

export function withQuery(view: SessionView, query: QueryView): SessionView {
  return { ...view, phase: "awaiting-label", query, budget: query.budget, banner: null };
}

/** Guard for double submissions: only one label per displayed step. */
export function beginSubmit(view: SessionView): SessionView | null {
  if (view.phase !== "awaiting-label" || view.query === null) return null;
  if (view.pendingStep === view.query.step) return null;
  return { ...view, phase: "submitting", pendingStep: view.query.step };
}

export function withMetrics(view: SessionView, metrics: MetricsSnapshot, submittedLabel?: number): SessionView {
  const lastWasError =
    submittedLabel === undefined || view.query === null
      ? view.lastWasError
      : submittedLabel !== view.query.predicted_label;
  return {
    ...view,
    phase: metrics.step >= metrics.budget ? "complete" : "querying",
    step: metrics.step,
    budget: metrics.budget,
    errorsFound: metrics.errors_found,
    sdr: metrics.sdr,
    sdrHistory: [...metrics.sdr_curve],
    lastWasError,
    query: null,
    pendingStep: null,
  };
}

export function withCompletion(view: SessionView): SessionView {
  return { ...view, phase: "complete", query: null, pendingStep: null };
}

export function withBanner(view: SessionView, message: string): SessionView {
  return { ...view, phase: "error", banner: message, pendingStep: null };
}

/** 409 handling: drop the displayed query so the current one reloads. */
export function withStaleQuery(view: SessionView): SessionView {
  return { ...view, phase: "querying", query: null, pendingStep: null };
}

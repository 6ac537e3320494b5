import type { PredictionResult, TargetScore } from "./types";

// DOM-free rendering: pure functions from service responses to row data
// and HTML strings, so they can be tested without a browser. No field is
// ever computed here; everything is copied from the response.

export interface ResultRow {
  target: string;
  family: string;
  score: number;
  auc: number | null;
  distance: number;
  reliable: boolean;
}

export function resultRows(result: PredictionResult): ResultRow[] {
  const rows = (result.targets ?? []).map((t: TargetScore) => ({
    target: t.target,
    family: t.family ?? "",
    score: t.score,
    auc: t.auc,
    distance: t.distance,
    reliable: t.reliable,
  }));
  // descending score; stable for ties
  return rows
    .map((row, i) => ({ row, i }))
    .sort((a, b) => b.row.score - a.row.score || a.i - b.i)
    .map((x) => x.row);
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function formatAuc(auc: number | null): string {
  return auc === null ? "n/a" : auc.toFixed(3);
}

export function renderResultTable(result: PredictionResult): string {
  if (result.error !== undefined) {
    return `<p class="parse-error">${escapeHtml(result.smiles)}: ${escapeHtml(
      result.error,
    )}</p>`;
  }
  const body = resultRows(result)
    .map((row) => {
      const badge = row.reliable
        ? '<span class="badge reliable">reliable</span>'
        : '<span class="badge unreliable">unreliable</span>';
      const cls = row.reliable ? "" : ' class="unreliable-row"';
      return (
        `<tr${cls}><td>${escapeHtml(row.target)}</td>` +
        `<td>${escapeHtml(row.family)}</td>` +
        `<td>${row.score.toFixed(6)}</td>` +
        `<td>${formatAuc(row.auc)}</td>` +
        `<td>${row.distance.toFixed(6)}</td>` +
        `<td>${badge}</td></tr>`
      );
    })
    .join("");
  return (
    '<table class="results"><thead><tr><th>Target</th><th>Family</th>' +
    "<th>Score</th><th>AUC</th><th>Distance</th><th>Reliability</th>" +
    `</tr></thead><tbody>${body}</tbody></table>`
  );
}

export function renderErrorBanner(message: string, retryable: boolean): string {
  const hint = retryable ? ' <button class="retry">Retry</button>' : "";
  return `<div class="banner error">${escapeHtml(message)}${hint}</div>`;
}

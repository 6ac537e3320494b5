import type { HistoryEntry } from "./history";

export interface ScoreDelta {
  target: string;
  before: number;
  after: number;
  delta: number;
}

// Per-target score deltas between two history entries, matched by target
// name, sorted by |delta| descending with a stable order for ties. The
// deltas are plain subtraction of service scores; nothing is recomputed.
export function compareEntries(
  before: HistoryEntry,
  after: HistoryEntry,
): ScoreDelta[] {
  const beforeScores = new Map(
    (before.result.targets ?? []).map((t) => [t.target, t.score]),
  );
  const deltas: ScoreDelta[] = [];
  for (const t of after.result.targets ?? []) {
    const prev = beforeScores.get(t.target);
    if (prev === undefined) continue;
    deltas.push({
      target: t.target,
      before: prev,
      after: t.score,
      delta: t.score - prev,
    });
  }
  return deltas
    .map((d, i) => ({ d, i }))
    .sort(
      (a, b) => Math.abs(b.d.delta) - Math.abs(a.d.delta) || a.i - b.i,
    )
    .map((x) => x.d);
}

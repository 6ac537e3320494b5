import type { PredictionResult } from "./types";

export interface HistoryEntry {
  seq: number;
  smiles: string;
  result: PredictionResult;
}

// One in-flight request per submission: each submission takes the next
// sequence number, and a response is accepted only if its submission is
// still the latest, so stale responses never reach the history.
export class SessionHistory {
  private seq = 0;
  private latest = 0;
  readonly entries: HistoryEntry[] = [];

  begin(): number {
    this.latest = ++this.seq;
    return this.latest;
  }

  accept(seq: number, smiles: string, result: PredictionResult): boolean {
    if (seq !== this.latest) return false;
    this.entries.push({ seq, smiles, result });
    return true;
  }
}

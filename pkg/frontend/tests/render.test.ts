import { describe, expect, it } from "vitest";

import { renderErrorBanner, renderResultTable, resultRows } from "../src/render";
import { goldenEthanol, goldenParseError } from "./fixtures";

describe("resultRows", () => {
  it("emits one row per target, sorted by descending score", () => {
    const rows = resultRows(goldenEthanol);
    expect(rows).toHaveLength(3);
    expect(rows.map((r) => r.target)).toEqual([
      "T_aromatic",
      "T_halogen",
      "T_weight",
    ]);
    expect(rows.map((r) => r.score)).toEqual([0.887766, 0.445566, 0.112233]);
  });

  it("copies every field from the response without recomputing", () => {
    const row = resultRows(goldenEthanol)[2];
    const source = goldenEthanol.targets![0];
    expect(row).toEqual({
      target: source.target,
      family: source.family,
      score: source.score,
      auc: source.auc,
      distance: source.distance,
      reliable: source.reliable,
    });
  });

  it("keeps tied scores in response order", () => {
    const tied = {
      smiles: "C",
      targets: [goldenEthanol.targets![0], goldenEthanol.targets![1]].map(
        (t) => ({ ...t, score: 0.5 }),
      ),
    };
    expect(resultRows(tied).map((r) => r.target)).toEqual([
      "T_weight",
      "T_aromatic",
    ]);
  });
});

describe("renderResultTable", () => {
  it("renders fixture values verbatim", () => {
    const html = renderResultTable(goldenEthanol);
    expect(html).toContain("<table");
    expect(html).toContain("0.887766");
    expect(html).toContain("0.910");
    expect(html).toContain("Nuclear Receptor");
    expect(html.match(/<tr/g)).toHaveLength(4); // header + 3 targets
  });

  it("flags unreliable rows with a badge and row class", () => {
    const html = renderResultTable(goldenEthanol);
    expect(html).toContain('class="unreliable-row"');
    expect(html).toContain('badge unreliable">unreliable');
    expect(html).toContain('badge reliable">reliable');
  });

  it("renders undefined AUC as n/a", () => {
    expect(renderResultTable(goldenEthanol)).toContain("n/a");
  });

  it("renders parse errors inline without a table", () => {
    const html = renderResultTable(goldenParseError);
    expect(html).toContain("parse-error");
    expect(html).toContain("unmatched ring closure 1");
    expect(html).not.toContain("<table");
  });

  it("escapes markup in SMILES and errors", () => {
    const html = renderResultTable({
      smiles: "<script>",
      error: 'bad & "worse"',
    });
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
    expect(html).toContain("&amp;");
  });
});

describe("renderErrorBanner", () => {
  it("offers retry only for retryable failures", () => {
    expect(renderErrorBanner("boom", true)).toContain("Retry");
    expect(renderErrorBanner("bad input", false)).not.toContain("Retry");
  });
});

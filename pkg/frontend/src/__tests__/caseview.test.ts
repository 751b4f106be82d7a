import { describe, expect, it } from "vitest";

import { Explanation } from "../api.js";
import { CaseView } from "../caseview.js";
import { strokeWidth } from "../layout.js";
import { fixtures } from "./fixture_service.js";

const explanation =
  (fixtures.explain_job_done as { explanation: Explanation }).explanation;

describe("case view thresholding", () => {
  it("renders exactly the edges at or above the slider value", () => {
    const view = new CaseView(explanation.target, explanation, 0.15);
    for (const e of view.visibleEdges()) {
      expect(e.weight).toBeGreaterThanOrEqual(0.15);
    }
    const hidden = explanation.edges.filter((e) => e.weight < 0.15);
    expect(view.visibleEdges().length + hidden.length).toBe(explanation.edges.length);
  });

  it("slider at 1.0 hides all edges but keeps nodes", () => {
    const view = new CaseView(explanation.target, explanation);
    view.setThreshold(1.0);
    expect(view.visibleEdges()).toEqual([]);
    expect(view.visibleNodes().length).toBe(explanation.nodes.length);
  });

  it("slider at 0 shows every edge", () => {
    const view = new CaseView(explanation.target, explanation);
    view.setThreshold(0);
    expect(view.visibleEdges().length).toBe(explanation.edges.length);
  });

  it("edge stroke width is strictly monotone in mask weight", () => {
    const weights = [0, 0.1, 0.15, 0.5, 0.99, 1];
    for (let i = 1; i < weights.length; i++) {
      expect(strokeWidth(weights[i])).toBeGreaterThan(strokeWidth(weights[i - 1]));
    }
  });

  it("reports the selected node's heaviest features in order", () => {
    const view = new CaseView(explanation.target, explanation);
    view.selectNode(explanation.target);
    const top = view.topFeatures(3);
    expect(top.length).toBe(3);
    expect(top[0].weight).toBeGreaterThanOrEqual(top[1].weight);
    expect(top[1].weight).toBeGreaterThanOrEqual(top[2].weight);
  });
});

/** Case state for one transaction under investigation: the fetched
 * explanation, the live threshold slider, and the selected-node panel.
 * Thresholding is purely client-side so the slider never re-optimizes. */

import { Explanation, ExplanationEdge, ExplanationNode } from "./api.js";

export interface FeatureImportance {
  index: number;
  weight: number;
}

export class CaseView {
  threshold: number;
  selectedNode: string | null = null;

  constructor(
    readonly txnId: string,
    readonly explanation: Explanation,
    threshold = 0.15,
  ) {
    this.threshold = threshold;
  }

  /** Edges currently rendered: exactly those at or above the slider value. */
  visibleEdges(): ExplanationEdge[] {
    return this.explanation.edges.filter((e) => e.weight >= this.threshold);
  }

  visibleNodes(): ExplanationNode[] {
    // nodes always stay visible; only edges are filtered by the slider
    return this.explanation.nodes;
  }

  setThreshold(value: number): void {
    this.threshold = Math.min(Math.max(value, 0), 1);
  }

  selectNode(id: string | null): void {
    this.selectedNode = id;
  }

  /** Top feature importances of the selected node, heaviest first. */
  topFeatures(limit = 5): FeatureImportance[] {
    const node = this.explanation.nodes.find((n) => n.id === this.selectedNode);
    if (!node) return [];
    return node.feat_importance
      .map((weight, index) => ({ index, weight }))
      .sort((a, b) => b.weight - a.weight)
      .slice(0, limit);
  }

  /** Entity neighbors of the selected node among visible edges (pivots). */
  linkedTxns(entityId: string): string[] {
    const out = new Set<string>();
    for (const e of this.visibleEdges()) {
      if (e.src === entityId) out.add(e.dst);
      if (e.dst === entityId) out.add(e.src);
    }
    return [...out].filter((id) =>
      this.explanation.nodes.some((n) => n.id === id && n.type === "txn"),
    );
  }
}

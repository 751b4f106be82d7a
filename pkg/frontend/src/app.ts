/** Analyst console wiring: triage table -> case view -> explanation panel
 * with live threshold slider, feature panel, entity timeline and 2-D
 * projection. The UI only ever mutates server state via POST /explain. */

import { ApiClient, Explanation, TxnSummary } from "./api.js";
import { CaseView } from "./caseview.js";
import { forceLayout, strokeWidth } from "./layout.js";
import { pollExplanation } from "./poll.js";

const NODE_COLOR: Record<string, string> = {
  txn: "#4878d0",
  pmt: "#ee854a",
  email: "#6acc64",
  addr: "#d65f5f",
  buyer: "#956cb4",
};

export class App {
  currentCase: CaseView | null = null;
  sortOrder: "asc" | "desc" = "desc";
  private inflightJob: string | null = null;

  constructor(
    readonly api: ApiClient,
    readonly root: Document,
    private readonly pollOpts: { sleep?: (ms: number) => Promise<void> } = {},
  ) {}

  // -- triage ----------------------------------------------------------------
  async loadTriage(part = "test"): Promise<TxnSummary[]> {
    const container = this.root.getElementById("triage");
    if (!container) throw new Error("missing #triage container");
    try {
      const page = await this.api.transactions({ part, sort: "score", order: this.sortOrder });
      this.renderTriage(container, page.items);
      return page.items;
    } catch (err) {
      this.showBanner(`service unreachable: ${(err as Error).message}`);
      return [];
    }
  }

  toggleSort(): void {
    this.sortOrder = this.sortOrder === "desc" ? "asc" : "desc";
  }

  private renderTriage(container: HTMLElement, items: TxnSummary[]): void {
    container.innerHTML = "";
    const table = this.root.createElement("table");
    const head = this.root.createElement("tr");
    head.innerHTML = "<th>txn</th><th>risk score</th><th>label</th><th>time</th>";
    table.appendChild(head);
    for (const item of items) {
      const row = this.root.createElement("tr");
      row.className = "triage-row";
      row.dataset.txn = item.id;
      // numbers rendered verbatim from the payload
      row.innerHTML = `<td>${item.id}</td><td>${item.score}</td>` +
        `<td>${item.label}</td><td>${item.ts}</td>`;
      row.addEventListener("click", () => void this.openCase(item.id));
      table.appendChild(row);
    }
    container.appendChild(table);
  }

  showBanner(message: string): void {
    const banner = this.root.getElementById("banner");
    if (banner) {
      banner.textContent = message;
      (banner as HTMLElement).style.display = "block";
    }
  }

  // -- case view --------------------------------------------------------------
  async openCase(txnId: string): Promise<CaseView> {
    await this.api.transaction(txnId); // row click fetches the detail record
    return this.explainAndRender(txnId);
  }

  /** POST /explain, poll to completion, then render the weighted subgraph. */
  async explainAndRender(txnId: string, threshold = 0.15): Promise<CaseView> {
    if (this.inflightJob) {
      throw new Error(`explanation ${this.inflightJob} still in flight`);
    }
    const submitted = await this.api.requestExplanation(txnId);
    this.inflightJob = submitted.job_id;
    try {
      const status = await pollExplanation(this.api, submitted.job_id, this.pollOpts);
      if (status.status !== "done" || !status.explanation) {
        this.showBanner(`explanation failed (job ${submitted.job_id}): ${status.error}`);
        throw new Error(status.error ?? "explanation failed");
      }
      this.currentCase = new CaseView(txnId, status.explanation, threshold);
      this.renderCase();
      return this.currentCase;
    } finally {
      this.inflightJob = null;
    }
  }

  setThreshold(value: number): void {
    if (!this.currentCase) return;
    this.currentCase.setThreshold(value);
    this.renderCase();
  }

  renderCase(): void {
    const view = this.currentCase;
    const container = this.root.getElementById("case");
    if (!view || !container) return;
    const exp = view.explanation;
    const edges = view.visibleEdges();
    const layout = forceLayout(exp.nodes.map((n) => n.id), edges,
      { iterations: 60 });
    const svgParts: string[] = [
      `<svg viewBox="0 0 800 600" id="case-svg" data-target="${exp.target}">`,
    ];
    for (const e of edges) {
      const a = layout.get(e.src)!;
      const b = layout.get(e.dst)!;
      svgParts.push(
        `<line class="mask-edge" x1="${a.x.toFixed(1)}" y1="${a.y.toFixed(1)}"` +
        ` x2="${b.x.toFixed(1)}" y2="${b.y.toFixed(1)}"` +
        ` stroke="#888" stroke-width="${strokeWidth(e.weight).toFixed(2)}"` +
        ` data-src="${e.src}" data-dst="${e.dst}" data-weight="${e.weight}"/>`);
    }
    for (const n of view.visibleNodes()) {
      const p = layout.get(n.id)!;
      const fill = n.type === "txn" && n.label === 1 ? "#c44" : NODE_COLOR[n.type] ?? "#999";
      svgParts.push(
        `<circle class="mask-node" cx="${p.x.toFixed(1)}" cy="${p.y.toFixed(1)}"` +
        ` r="${n.id === exp.target ? 12 : 8}" fill="${fill}" data-id="${n.id}"` +
        ` data-type="${n.type}"/>`);
    }
    svgParts.push("</svg>");
    container.innerHTML =
      `<div id="threshold-box"><input type="range" id="threshold" min="0" max="1"` +
      ` step="0.01" value="${view.threshold}"/>` +
      `<span id="threshold-value">${view.threshold}</span></div>` +
      svgParts.join("");
    const slider = this.root.getElementById("threshold") as HTMLInputElement | null;
    slider?.addEventListener("input", () => this.setThreshold(Number(slider.value)));
    for (const el of Array.from(container.querySelectorAll(".mask-node"))) {
      el.addEventListener("click", () =>
        void this.selectNode((el as HTMLElement).dataset.id!));
    }
  }

  // -- node panel / pivots -------------------------------------------------------
  async selectNode(nodeId: string): Promise<void> {
    const view = this.currentCase;
    if (!view) return;
    view.selectNode(nodeId);
    const panel = this.root.getElementById("node-panel");
    if (!panel) return;
    const node = view.explanation.nodes.find((n) => n.id === nodeId);
    if (!node) return;
    const rows = view.topFeatures().map(
      (f) => `<li>f_${f.index}: ${f.weight}</li>`).join("");
    let html = `<h3>${node.id} (${node.type})</h3><ul id="feat-panel">${rows}</ul>`;
    if (node.type !== "txn") {
      const timeline = await this.api.timeline(nodeId);
      const points = timeline.points.map(
        (p) => `<li data-txn="${p.txn}">${p.ts}: ${p.score}</li>`).join("");
      html += `<ol id="timeline-panel">${points}</ol>`;
      const linked = view.linkedTxns(nodeId);
      if (linked.length >= 2) {
        const proj = await this.api.project(linked);
        html += `<div id="projection-panel" data-count="${proj.coords.length}"></div>`;
      }
      html += linked
        .filter((id) => id !== view.txnId)
        .map((id) => `<button class="pivot" data-txn="${id}">explain ${id}</button>`)
        .join("");
    }
    panel.innerHTML = html;
    for (const el of Array.from(panel.querySelectorAll(".pivot"))) {
      el.addEventListener("click", () =>
        void this.explainAndRender((el as HTMLElement).dataset.txn!));
    }
  }
}

/** Small deterministic force-directed layout. Initial positions are seeded
 * by hashing node ids, so re-renders of the same subgraph are stable. */

export interface LayoutNode {
  id: string;
  x: number;
  y: number;
}

interface Edge {
  src: string;
  dst: string;
}

function hash32(s: string): number {
  let h = 2166136261;
  for (let i = 0; i < s.length; i++) {
    h ^= s.charCodeAt(i);
    h = Math.imul(h, 16777619);
  }
  return h >>> 0;
}

export function forceLayout(
  ids: string[],
  edges: Edge[],
  opts: { width?: number; height?: number; iterations?: number } = {},
): Map<string, LayoutNode> {
  const width = opts.width ?? 800;
  const height = opts.height ?? 600;
  const iterations = opts.iterations ?? 150;
  const nodes = new Map<string, LayoutNode>();
  for (const id of ids) {
    const h = hash32(id);
    nodes.set(id, {
      id,
      x: (h % 1000) / 1000 * width,
      y: ((h >>> 10) % 1000) / 1000 * height,
    });
  }
  const k = Math.sqrt((width * height) / Math.max(ids.length, 1));
  for (let it = 0; it < iterations; it++) {
    const temp = 0.1 * Math.max(width, height) * (1 - it / iterations);
    const disp = new Map<string, { dx: number; dy: number }>();
    for (const id of ids) disp.set(id, { dx: 0, dy: 0 });
    // repulsion
    for (let i = 0; i < ids.length; i++) {
      for (let j = i + 1; j < ids.length; j++) {
        const a = nodes.get(ids[i])!;
        const b = nodes.get(ids[j])!;
        let dx = a.x - b.x;
        let dy = a.y - b.y;
        const d2 = Math.max(dx * dx + dy * dy, 1e-6);
        const f = (k * k) / d2;
        dx *= f;
        dy *= f;
        disp.get(a.id)!.dx += dx;
        disp.get(a.id)!.dy += dy;
        disp.get(b.id)!.dx -= dx;
        disp.get(b.id)!.dy -= dy;
      }
    }
    // attraction along edges
    for (const e of edges) {
      const a = nodes.get(e.src);
      const b = nodes.get(e.dst);
      if (!a || !b) continue;
      const dx = a.x - b.x;
      const dy = a.y - b.y;
      const d = Math.sqrt(Math.max(dx * dx + dy * dy, 1e-6));
      const f = (d * d) / k / d;
      disp.get(a.id)!.dx -= dx * f;
      disp.get(a.id)!.dy -= dy * f;
      disp.get(b.id)!.dx += dx * f;
      disp.get(b.id)!.dy += dy * f;
    }
    for (const id of ids) {
      const n = nodes.get(id)!;
      const d = disp.get(id)!;
      const len = Math.sqrt(Math.max(d.dx * d.dx + d.dy * d.dy, 1e-12));
      n.x += (d.dx / len) * Math.min(len, temp);
      n.y += (d.dy / len) * Math.min(len, temp);
      n.x = Math.min(Math.max(n.x, 10), width - 10);
      n.y = Math.min(Math.max(n.y, 10), height - 10);
    }
  }
  return nodes;
}

/** Edge stroke width: strictly monotone in the mask weight. */
export function strokeWidth(weight: number): number {
  return 0.5 + 6 * weight;
}

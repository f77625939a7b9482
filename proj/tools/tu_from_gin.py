#!/usr/bin/env python3
"""Convert a graph dataset from the GIN text format to the TU multi-file layout.

GIN format (one file):
    N
    for each graph: "n label", then n lines "tag deg nb1 nb2 ..." (0-indexed)

TU layout (directory):
    <name>_A.txt               one "i, j" pair per line, 1-indexed, both directions
    <name>_graph_indicator.txt vertex -> graph id (1-indexed)
    <name>_graph_labels.txt    one label per graph
    <name>_node_labels.txt     one label per vertex

Usage: tu_from_gin.py input.txt output_dir name
"""

import sys
from pathlib import Path


def main() -> int:
    if len(sys.argv) != 4:
        print(__doc__, file=sys.stderr)
        return 2
    src, out_dir, name = Path(sys.argv[1]), Path(sys.argv[2]), sys.argv[3]
    tok = src.read_text().split()
    pos = 0

    def nxt() -> int:
        nonlocal pos
        v = int(tok[pos])
        pos += 1
        return v

    n_graphs = nxt()
    edges = []          # (u, v) global, 1-indexed
    indicator = []      # graph id per vertex, 1-indexed
    graph_labels = []
    node_labels = []
    base = 0
    for g in range(n_graphs):
        n, label = nxt(), nxt()
        graph_labels.append(label)
        for v in range(n):
            tag, deg = nxt(), nxt()
            node_labels.append(tag)
            indicator.append(g + 1)
            for _ in range(deg):
                u = nxt()
                edges.append((base + v + 1, base + u + 1))
        base += n

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"{name}_A.txt", "w") as f:
        for u, v in edges:
            f.write(f"{u}, {v}\n")
    with open(out_dir / f"{name}_graph_indicator.txt", "w") as f:
        f.writelines(f"{g}\n" for g in indicator)
    with open(out_dir / f"{name}_graph_labels.txt", "w") as f:
        f.writelines(f"{l}\n" for l in graph_labels)
    with open(out_dir / f"{name}_node_labels.txt", "w") as f:
        f.writelines(f"{t}\n" for t in node_labels)
    print(f"{name}: {n_graphs} graphs, {base} vertices, {len(edges)} directed edges")
    return 0


if __name__ == "__main__":
    sys.exit(main())

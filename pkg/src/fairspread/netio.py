"""Edge-list ingestion and component extraction for real networks."""

from __future__ import annotations

import csv

import numpy as np

from .model import CommunityLabels, Network


def read_edge_list(path, label_path=None) -> Network:
    """Read an undirected simple graph from a text edge list.

    Lines hold two whitespace- or comma-separated node ids; lines starting
    with '#' (or blank) are ignored.  Direction is ignored, duplicate
    edges are collapsed, self-loops dropped.  Node ids are mapped to a
    contiguous 0-based index; the original ids are retained on the
    returned network.  An optional label file holds (node id, label) rows.
    """
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two node ids, "
                                 f"got {line!r}")
            pairs.append((parts[0], parts[1]))

    ids = sorted({u for pair in pairs for u in pair}, key=_id_key)
    index = {u: i for i, u in enumerate(ids)}
    n = len(ids)
    edge_set = set()
    for u, w in pairs:
        i, j = index[u], index[w]
        if i == j:
            continue
        edge_set.add((min(i, j), max(i, j)))
    edges = (np.array(sorted(edge_set), dtype=np.int64)
             if edge_set else np.empty((0, 2), dtype=np.int64))

    labels = None
    if label_path is not None:
        raw = {}
        with open(label_path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.replace(",", " ").split()
                if lineno == 1 and [p.lower() for p in parts] == ["node", "label"]:
                    continue  # header row from write_labels_csv
                if len(parts) != 2:
                    raise ValueError(f"{label_path}:{lineno}: expected "
                                     f"(node id, label), got {line!r}")
                node, lab = parts
                if node not in index:
                    raise ValueError(f"{label_path}:{lineno}: label for "
                                     f"unknown node {node!r}")
                raw[index[node]] = lab
        missing = set(range(n)) - set(raw)
        if missing:
            raise ValueError(f"{label_path}: no label for node id "
                             f"{ids[min(missing)]!r}")
        values = sorted(set(raw.values()), key=_id_key)
        val_index = {v: k for k, v in enumerate(values)}
        c = np.array([val_index[raw[i]] for i in range(n)], dtype=np.int64)
        labels = CommunityLabels(c=c, K=len(values))

    return Network(n=n, edges=edges, labels=labels,
                   node_ids=np.array(ids, dtype=object))


def _id_key(value: str):
    """Sort numerically when possible so node 2 precedes node 10."""
    try:
        return (0, float(value), value)
    except ValueError:
        return (1, 0.0, value)


def extract_lcc(network: Network) -> Network:
    """Induced subgraph on the largest connected component.

    Ties go to the component containing the lowest original index.  The
    index remapping is retained via node_ids.
    """
    if network.n == 0:
        raise ValueError("empty network")
    neigh = network.adjacency_lists()
    comp = np.full(network.n, -1, dtype=np.int64)
    comp_id = 0
    for start in range(network.n):
        if comp[start] != -1:
            continue
        stack = [start]
        comp[start] = comp_id
        while stack:
            u = stack.pop()
            for w in neigh[u]:
                if comp[w] == -1:
                    comp[w] = comp_id
                    stack.append(w)
        comp_id += 1
    sizes = np.bincount(comp, minlength=comp_id)
    best = int(np.argmax(sizes))  # argmax takes the first max: lowest start id
    keep = np.where(comp == best)[0]
    remap = {old: new for new, old in enumerate(keep)}
    mask = np.isin(network.edges[:, 0], keep) if network.edges.size else np.zeros(0, bool)
    kept_edges = network.edges[mask] if network.edges.size else network.edges
    edges = (np.array([[remap[i], remap[j]] for i, j in kept_edges], dtype=np.int64)
             if kept_edges.size else np.empty((0, 2), dtype=np.int64))
    labels = None
    if network.labels is not None:
        labels = CommunityLabels(c=network.labels.c[keep], K=network.labels.K)
    node_ids = (network.node_ids[keep] if network.node_ids is not None
                else keep.astype(object))
    return Network(n=keep.size, edges=edges, labels=labels, node_ids=node_ids)


def write_labels_csv(path, network: Network, labels: CommunityLabels) -> None:
    """Write (node, label) rows using original node ids when available."""
    ids = (network.node_ids if network.node_ids is not None
           else np.arange(network.n))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "label"])
        for i in range(network.n):
            writer.writerow([ids[i], int(labels.c[i])])

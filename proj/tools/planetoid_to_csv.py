#!/usr/bin/env python3
"""Convert a Planetoid dataset (ind.<name>.* files) into the CSV directory
layout `tcgu` reads: features.csv, edges.csv and labels.csv.

    python3 tools/planetoid_to_csv.py --raw planetoid/data --name cora --out $TCGU_DATA_DIR/cora

Node order follows the usual Planetoid reconstruction: allx rows first, then
the test rows placed at their test.index positions. Citeseer's isolated test
ids get zero features and the most common label, mirroring common loaders.
"""

import argparse
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load_part(raw: Path, name: str, part: str):
    with open(raw / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def to_dense(m):
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def convert(raw: Path, name: str):
    x, y, tx, ty, allx, ally, graph = (load_part(raw, name, p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_index = [int(line) for line in (raw / f"ind.{name}.test.index").read_text().split()]
    sorted_test = np.sort(test_index)

    tx, ty = to_dense(tx), np.asarray(ty)
    if name == "citeseer":
        full = np.arange(sorted_test.min(), sorted_test.max() + 1)
        tx_ext = np.zeros((len(full), tx.shape[1]))
        ty_ext = np.zeros((len(full), ty.shape[1]))
        tx_ext[sorted_test - sorted_test.min(), :] = tx
        ty_ext[sorted_test - sorted_test.min(), :] = ty
        missing = np.setdiff1d(full, sorted_test) - sorted_test.min()
        ty_ext[missing, np.argmax(ty.sum(axis=0))] = 1
        tx, ty = tx_ext, ty_ext

    features = np.vstack([to_dense(allx), tx])
    labels = np.vstack([np.asarray(ally), ty])
    features[test_index, :] = features[sorted_test, :]
    labels[test_index, :] = labels[sorted_test, :]
    n = features.shape[0]

    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))
    return features, labels.argmax(axis=1), sorted(edges)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--raw", type=Path, required=True, help="directory holding ind.<name>.* files")
    ap.add_argument("--name", required=True, help="cora, citeseer or pubmed")
    ap.add_argument("--out", type=Path, required=True, help="output directory")
    args = ap.parse_args(argv)

    features, labels, edges = convert(args.raw, args.name.lower())
    args.out.mkdir(parents=True, exist_ok=True)
    np.savetxt(args.out / "features.csv", features, delimiter=",", fmt="%.8g")
    with open(args.out / "edges.csv", "w") as f:
        f.write("src,dst\n")
        f.writelines(f"{u},{v}\n" for u, v in edges)
    with open(args.out / "labels.csv", "w") as f:
        f.write("node,label\n")
        f.writelines(f"{i},{int(c)}\n" for i, c in enumerate(labels))
    print(f"{args.name}: {features.shape[0]} nodes, {len(edges)} edges, {features.shape[1]} features, "
          f"{labels.max() + 1} classes -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

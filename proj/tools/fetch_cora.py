#!/usr/bin/env python3
"""Fetch the Cora citation graph and write it in the raw LINQS layout.

The graphdatascience wheel on PyPI ships Cora as two parquet files. This
script downloads the wheel with pip, extracts those files and writes

    OUT/cora.content   <paper_id> \t <f_0> ... \t <f_1432> \t <subject>
    OUT/cora.cites     <cited_id> \t <citing_id>

which `selfpro convert --format linqs` turns into an edge_list_dir.
"""

import argparse
import pathlib
import subprocess
import sys
import tempfile
import zipfile

import pandas as pd

WHEEL = "graphdatascience==2.1"
SUBJECTS = [
    "Neural_Networks",
    "Rule_Learning",
    "Reinforcement_Learning",
    "Probabilistic_Methods",
    "Theory",
    "Genetic_Algorithms",
    "Case_Based",
]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", type=pathlib.Path)
    ap.add_argument("--wheel", default=WHEEL)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "--quiet",
             "--only-binary", ":all:", args.wheel, "-d", tmp],
            check=True,
        )
        wheel = next(pathlib.Path(tmp).glob("graphdatascience-*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            for name in ("cora_nodes.parquet.gzip", "cora_rels.parquet.gzip"):
                zf.extract(f"graphdatascience/resources/cora/{name}", tmp)
        res = pathlib.Path(tmp) / "graphdatascience/resources/cora"
        nodes = pd.read_parquet(res / "cora_nodes.parquet.gzip")
        rels = pd.read_parquet(res / "cora_rels.parquet.gzip")

    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "cora.content", "w") as f:
        for pid, subject, feats in zip(nodes["nodeId"], nodes["subject"], nodes["features"]):
            cols = [str(int(pid))] + [str(int(x)) for x in feats] + [SUBJECTS[int(subject)]]
            f.write("\t".join(cols) + "\n")
    with open(args.out / "cora.cites", "w") as f:
        for src, dst in zip(rels["sourceNodeId"], rels["targetNodeId"]):
            f.write(f"{int(src)}\t{int(dst)}\n")
    print(f"wrote {len(nodes)} papers, {len(rels)} citations to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

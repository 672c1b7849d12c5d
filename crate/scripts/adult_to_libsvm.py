#!/usr/bin/env python3
"""Binarize the raw UCI Adult training file into LibSVM format.

Follows the published a9a recipe: the six continuous attributes are
discretized (quintiles for age, fnlwgt, education-num and hours-per-week;
zero/nonzero for capital-gain and capital-loss) and every categorical
attribute with m values becomes m binary indicators. Missing values ("?")
leave their whole group at zero. The result has 123 binary features and one
row per training example.

The exact quantile thresholds and feature order of the official a9a file are
not published, so this is an a9a-like stand-in, not a byte-identical copy.

usage: adult_to_libsvm.py adult.data out.libsvm.gz
"""

import gzip
import sys

import numpy as np

COLUMNS = [
    ("age", "quantile"),
    ("workclass", ["Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov",
                   "Local-gov", "State-gov", "Without-pay", "Never-worked"]),
    ("fnlwgt", "quantile"),
    ("education", ["Bachelors", "Some-college", "11th", "HS-grad", "Prof-school",
                   "Assoc-acdm", "Assoc-voc", "9th", "7th-8th", "12th", "Masters",
                   "1st-4th", "10th", "Doctorate", "5th-6th", "Preschool"]),
    ("education-num", "quantile"),
    ("marital-status", ["Married-civ-spouse", "Divorced", "Never-married", "Separated",
                        "Widowed", "Married-spouse-absent", "Married-AF-spouse"]),
    ("occupation", ["Tech-support", "Craft-repair", "Other-service", "Sales",
                    "Exec-managerial", "Prof-specialty", "Handlers-cleaners",
                    "Machine-op-inspct", "Adm-clerical", "Farming-fishing",
                    "Transport-moving", "Priv-house-serv", "Protective-serv",
                    "Armed-Forces"]),
    ("relationship", ["Wife", "Own-child", "Husband", "Not-in-family", "Other-relative",
                      "Unmarried"]),
    ("race", ["White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"]),
    ("sex", ["Female", "Male"]),
    ("capital-gain", "nonzero"),
    ("capital-loss", "nonzero"),
    ("hours-per-week", "quantile"),
    ("native-country", ["United-States", "Cambodia", "England", "Puerto-Rico", "Canada",
                        "Germany", "Outlying-US(Guam-USVI-etc)", "India", "Japan", "Greece",
                        "South", "China", "Cuba", "Iran", "Honduras", "Philippines", "Italy",
                        "Poland", "Jamaica", "Vietnam", "Mexico", "Portugal", "Ireland",
                        "France", "Dominican-Republic", "Laos", "Ecuador", "Taiwan", "Haiti",
                        "Columbia", "Hungary", "Guatemala", "Nicaragua", "Scotland",
                        "Thailand", "Yugoslavia", "El-Salvador", "Trinadad&Tobago", "Peru",
                        "Hong", "Holand-Netherlands"]),
]


def main(src, dst):
    rows = []
    with open(src) as fh:
        for line in fh:
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 15:
                continue
            rows.append(parts)

    groups = []
    for col, (name, kind) in enumerate(COLUMNS):
        if kind == "quantile":
            values = np.array([float(r[col]) for r in rows])
            cuts = np.quantile(values, [0.2, 0.4, 0.6, 0.8])
            groups.append((col, "quantile", cuts, 5))
        elif kind == "nonzero":
            groups.append((col, "nonzero", None, 2))
        else:
            groups.append((col, "category", {v: i for i, v in enumerate(kind)}, len(kind)))

    dim = sum(g[3] for g in groups)
    assert dim == 123, dim

    with gzip.GzipFile(dst, "wb", mtime=0) as out:
        for r in rows:
            label = "+1" if r[14].startswith(">50K") else "-1"
            feats = []
            offset = 0
            for col, kind, info, width in groups:
                raw = r[col]
                if kind == "quantile":
                    feats.append(offset + int(np.searchsorted(info, float(raw), side="right")))
                elif kind == "nonzero":
                    feats.append(offset + (1 if float(raw) != 0.0 else 0))
                elif raw in info:
                    feats.append(offset + info[raw])
                offset += width
            tokens = " ".join(f"{i + 1}:1" for i in sorted(feats))
            out.write(f"{label} {tokens}\n".encode())
    print(f"wrote {len(rows)} rows, dim={dim}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])

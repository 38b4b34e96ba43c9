#!/usr/bin/env python3
"""Write data/wdbc.csv in the classic UCI layout: id,diagnosis,f1..f30.

Feature values come from scikit-learn's bundled copy of the Wisconsin
Diagnostic Breast Cancer data (569 rows, 30 features). Row ids are
sequential; the loader drops them anyway.
"""

import os

from sklearn.datasets import load_breast_cancer

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "wdbc.csv")


def main():
    d = load_breast_cancer()
    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w") as fh:
        for i, (row, target) in enumerate(zip(d.data, d.target)):
            # sklearn target: 0 = malignant, 1 = benign
            diagnosis = "M" if target == 0 else "B"
            values = ",".join(repr(float(v)) for v in row)
            fh.write(f"{i + 1},{diagnosis},{values}\n")
    print(f"wrote {OUT}: {len(d.data)} rows, {d.data.shape[1]} features")


if __name__ == "__main__":
    main()

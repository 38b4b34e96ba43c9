#!/usr/bin/env python3
"""Write data/ckd.csv: a seeded synthetic sample in the UCI chronic kidney
disease layout (400 rows, 24 attributes + class, '?' for missing values,
250 ckd / 150 notckd).

The original UCI file cannot be redistributed from this environment, so this
script draws per-class feature distributions that mimic the published
summary statistics (ckd patients: low hemoglobin/sodium/specific gravity,
elevated creatinine/urea/glucose, frequent hypertension and diabetes). Like
the real data, the classes are close to linearly separable.
"""

import os

import numpy as np

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "ckd.csv")

COLUMNS = [
    "age", "bp", "sg", "al", "su", "rbc", "pc", "pcc", "ba", "bgr",
    "bu", "sc", "sod", "pot", "hemo", "pcv", "wc", "rc", "htn", "dm",
    "cad", "appet", "pe", "ane", "class",
]

# Per-column missing rates, loosely following the real file (cell counts
# there range from complete columns to ~38% missing for red blood cells).
MISSING = {
    "age": 0.02, "bp": 0.03, "sg": 0.10, "al": 0.10, "su": 0.10,
    "rbc": 0.30, "pc": 0.15, "pcc": 0.01, "ba": 0.01, "bgr": 0.10,
    "bu": 0.05, "sc": 0.05, "sod": 0.20, "pot": 0.20, "hemo": 0.12,
    "pcv": 0.16, "wc": 0.25, "rc": 0.30, "htn": 0.01, "dm": 0.01,
    "cad": 0.01, "appet": 0.01, "pe": 0.01, "ane": 0.01,
}

SG_LEVELS = np.array([1.005, 1.010, 1.015, 1.020, 1.025])


def fmt(v, nd=1):
    return f"{round(float(v), nd):g}"


def draw_row(rng, ckd):
    row = {}
    if ckd:
        row["age"] = fmt(np.clip(rng.normal(56, 16), 4, 90), 0)
        row["bp"] = fmt(np.clip(round(rng.normal(79, 13) / 5) * 5, 50, 180), 0)
        row["sg"] = f"{SG_LEVELS[rng.choice(5, p=[0.28, 0.3, 0.22, 0.14, 0.06])]:.3f}"
        row["al"] = str(rng.choice(6, p=[0.18, 0.2, 0.22, 0.2, 0.14, 0.06]))
        row["su"] = str(rng.choice(6, p=[0.55, 0.12, 0.12, 0.1, 0.07, 0.04]))
        row["rbc"] = "abnormal" if rng.random() < 0.35 else "normal"
        row["pc"] = "abnormal" if rng.random() < 0.40 else "normal"
        row["pcc"] = "present" if rng.random() < 0.17 else "notpresent"
        row["ba"] = "present" if rng.random() < 0.09 else "notpresent"
        row["bgr"] = fmt(np.clip(rng.normal(175, 75), 70, 490), 0)
        row["bu"] = fmt(np.clip(rng.normal(73, 48), 10, 390), 0)
        row["sc"] = fmt(np.clip(rng.normal(4.4, 4.0), 0.9, 48), 1)
        row["sod"] = fmt(np.clip(rng.normal(133, 6), 104, 150), 0)
        row["pot"] = fmt(np.clip(rng.normal(4.9, 1.8), 2.5, 47), 1)
        row["hemo"] = fmt(np.clip(rng.normal(10.6, 2.1), 3.1, 14.2), 1)
        row["pcv"] = fmt(np.clip(rng.normal(32.8, 6.8), 9, 45), 0)
        row["wc"] = fmt(np.clip(round(rng.normal(9100, 3100) / 100) * 100, 2200, 26400), 0)
        row["rc"] = fmt(np.clip(rng.normal(3.9, 0.9), 2.1, 5.4), 1)
        row["htn"] = "yes" if rng.random() < 0.58 else "no"
        row["dm"] = "yes" if rng.random() < 0.52 else "no"
        row["cad"] = "yes" if rng.random() < 0.13 else "no"
        row["appet"] = "poor" if rng.random() < 0.32 else "good"
        row["pe"] = "yes" if rng.random() < 0.30 else "no"
        row["ane"] = "yes" if rng.random() < 0.24 else "no"
        row["class"] = "ckd"
    else:
        row["age"] = fmt(np.clip(rng.normal(46, 16), 12, 80), 0)
        row["bp"] = fmt(np.clip(round(rng.normal(71, 9) / 5) * 5, 60, 90), 0)
        row["sg"] = f"{SG_LEVELS[rng.choice(5, p=[0.0, 0.02, 0.08, 0.45, 0.45])]:.3f}"
        row["al"] = "0"
        row["su"] = "0"
        row["rbc"] = "normal"
        row["pc"] = "normal"
        row["pcc"] = "notpresent"
        row["ba"] = "notpresent"
        row["bgr"] = fmt(np.clip(rng.normal(108, 18), 70, 140), 0)
        row["bu"] = fmt(np.clip(rng.normal(33, 10), 10, 60), 0)
        row["sc"] = fmt(np.clip(rng.normal(0.9, 0.25), 0.4, 1.4), 1)
        row["sod"] = fmt(np.clip(rng.normal(141, 3.2), 135, 150), 0)
        row["pot"] = fmt(np.clip(rng.normal(4.3, 0.5), 3.3, 5.0), 1)
        row["hemo"] = fmt(np.clip(rng.normal(15.2, 1.2), 13.0, 17.8), 1)
        row["pcv"] = fmt(np.clip(rng.normal(46, 4), 40, 54), 0)
        row["wc"] = fmt(np.clip(round(rng.normal(7700, 1800) / 100) * 100, 4300, 11000), 0)
        row["rc"] = fmt(np.clip(rng.normal(5.4, 0.6), 4.5, 6.5), 1)
        row["htn"] = "no"
        row["dm"] = "no"
        row["cad"] = "no"
        row["appet"] = "good"
        row["pe"] = "no"
        row["ane"] = "no"
        row["class"] = "notckd"
    return row


def main():
    rng = np.random.default_rng(20240811)
    labels = [True] * 250 + [False] * 150
    rng.shuffle(labels)
    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w") as fh:
        fh.write(",".join(COLUMNS) + "\n")
        for ckd in labels:
            row = draw_row(rng, ckd)
            for col, rate in MISSING.items():
                if rng.random() < rate:
                    row[col] = "?"
            fh.write(",".join(row[c] for c in COLUMNS) + "\n")
    print(f"wrote {OUT}: {len(labels)} rows, {len(COLUMNS) - 1} attributes")


if __name__ == "__main__":
    main()

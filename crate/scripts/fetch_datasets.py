#!/usr/bin/env python3
"""Download the four tabular benchmark datasets into data/ as numeric CSVs.

Each file keeps only numeric feature columns plus a string `label` column,
matching `harness::real_datasets`:

    creditcard.csv   null label "0"
    shuttle.csv      null label "1"
    kddcup99.csv     null label "normal."
    mammography.csv  null label "-1"
"""

import argparse
import pathlib

import pandas as pd
from sklearn.datasets import fetch_kddcup99, fetch_openml

OPENML = {
    "creditcard": ("creditcard", 1),
    "shuttle": ("shuttle", 1),
    "mammography": ("mammography", 1),
}


def normalize_label(value) -> str:
    text = str(value).strip().strip("'")
    try:
        number = float(text)
    except ValueError:
        return text
    return str(int(number)) if number.is_integer() else text


def write(frame: pd.DataFrame, target: pd.Series, path: pathlib.Path) -> None:
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    numeric = numeric.loc[:, numeric.notna().all()]
    numeric["label"] = [normalize_label(v) for v in target]
    numeric.to_csv(path, index=False)
    print(f"{path}: {len(numeric)} rows, {numeric.shape[1] - 1} features")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="data", type=pathlib.Path)
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    for name, (openml_name, version) in OPENML.items():
        bunch = fetch_openml(openml_name, version=version, as_frame=True, parser="auto")
        write(bunch.data, bunch.target, args.out / f"{name}.csv")

    kdd = fetch_kddcup99(as_frame=True)
    labels = [v.decode() if isinstance(v, bytes) else v for v in kdd.target]
    write(kdd.data, pd.Series(labels), args.out / "kddcup99.csv")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Regenerate the CSV files under data/.

adult.csv and heart.csv are copied out of two PyPI wheels that bundle them
(responsibly 0.1.2 and scikit-lego 0.9.10); synthetic_small.csv is generated
from a fixed seed. Usage: python3 tools/make_datasets.py [out_dir]
"""

import csv
import io
import pathlib
import random
import subprocess
import sys
import tempfile
import zipfile

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
    "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
    "hours-per-week", "native-country", "income",
]


def fetch_wheel(name, version, into):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", into,
         f"{name}=={version}"],
        check=True,
    )
    return next(pathlib.Path(into).glob(f"{name.replace('-', '_')}-{version}-*.whl"))


def write_adult(wheel, out):
    raw = zipfile.ZipFile(wheel).read("responsibly/dataset/adult/adult.data").decode()
    rows = [[c.strip() for c in line.split(",")] for line in raw.splitlines() if line.strip()]
    with open(out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(ADULT_COLUMNS)
        w.writerows(rows)


def write_heart(wheel, out):
    inner = zipfile.ZipFile(io.BytesIO(zipfile.ZipFile(wheel).read("sklego/data/hearts.zip")))
    lines = [line for line in inner.read("heart.csv").decode().splitlines() if line.strip()]
    pathlib.Path(out).write_text("\n".join(lines) + "\n")


def write_synthetic(out):
    r = random.Random(11)
    with open(out, "w") as f:
        f.write("x1,x2,x3,x4,color,target\n")
        for _ in range(200):
            x1, x2, x3, x4 = (round(r.random(), 3) for _ in range(4))
            color = r.choice(["red", "green", "blue"])
            y = (x1 > 0.5 and x2 <= 0.4) or (color == "red" and x3 > 0.5)
            if r.random() < 0.05:
                y = not y
            f.write(",".join(map(str, (x1, x2, x3, x4, color, "yes" if y else "no"))) + "\n")


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "data")
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        write_adult(fetch_wheel("responsibly", "0.1.2", tmp), out / "adult.csv")
        write_heart(fetch_wheel("scikit-lego", "0.9.10", tmp), out / "heart.csv")
    write_synthetic(out / "synthetic_small.csv")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Download the 330-row Los Angeles ozone data and write data/ozone.csv.

The table ships inside the `faraway` Python package. The day-of-year column is
dropped, leaving the response (O3) followed by eight meteorological covariates.
"""
import bz2
import csv
import io
import pathlib
import subprocess
import sys
import tempfile
import zipfile

MEMBER = "faraway/datasets/ozone/ozone.csv.bz2"
COLUMNS = ["O3", "vh", "wind", "humidity", "temp", "ibh", "dpg", "ibt", "vis"]


def main() -> int:
    root = pathlib.Path(__file__).resolve().parent.parent
    target = root / "data" / "ozone.csv"
    target.parent.mkdir(exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "faraway", "--no-deps", "-d", tmp, "-q"],
            check=True,
        )
        wheel = next(pathlib.Path(tmp).glob("faraway-*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            raw = bz2.decompress(zf.read(MEMBER)).decode()
    rows = list(csv.DictReader(io.StringIO(raw)))
    if len(rows) != 330:
        print(f"expected 330 rows, found {len(rows)}", file=sys.stderr)
        return 1
    with target.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([r[c] for c in COLUMNS])
    print(f"wrote {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Merge the UCI ``adult.data`` and ``adult.test`` files into one CSV with a header.

    python3 scripts/combine_adult.py adult.data adult.test -o configs/adult.csv
"""
import argparse
import csv

COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
    "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
    "hours-per-week", "native-country", "income",
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("inputs", nargs="+")
    ap.add_argument("-o", "--output", required=True)
    args = ap.parse_args(argv)
    n = 0
    with open(args.output, "w", newline="") as out:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(COLUMNS)
        for path in args.inputs:
            with open(path, newline="") as fh:
                for row in csv.reader(fh):
                    cells = [c.strip() for c in row]
                    if len(cells) != len(COLUMNS):
                        continue  # blank lines and the "|1x3 Cross validator" banner
                    w.writerow(cells)
                    n += 1
    print(f"wrote {n} rows to {args.output}")


if __name__ == "__main__":
    main()

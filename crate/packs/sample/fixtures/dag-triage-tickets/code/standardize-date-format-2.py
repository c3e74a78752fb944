import csv
import json
import os


def read_rows(path):
    with open(path, encoding="utf-8", newline="") as f:
        if path.endswith(".jsonl"):
            rows = [json.loads(line) for line in f if line.strip()]
            return (list(rows[0]) if rows else []), rows
        reader = csv.DictReader(f)
        return list(reader.fieldnames or []), list(reader)


def write_rows(path, columns, rows):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        if path.endswith(".jsonl"):
            for row in rows:
                f.write(json.dumps({c: row.get(c) for c in columns}, ensure_ascii=False) + "\n")
            return
        writer = csv.DictWriter(f, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: "" if row.get(c) is None else row.get(c) for c in columns})


INPUT = "inputs/tickets.jsonl"
OUTPUT = "out/tickets.jsonl"

import re

PATTERNS = [
    (re.compile(r"^(\d{4})-(\d{1,2})-(\d{1,2})$"), ("y", "m", "d")),
    (re.compile(r"^(\d{4})/(\d{1,2})/(\d{1,2})$"), ("y", "m", "d")),
    (re.compile(r"^(\d{1,2})/(\d{1,2})/(\d{4})$"), ("m", "d", "y")),
]


def iso_date(value):
    for pattern, order in PATTERNS:
        m = pattern.match(value.strip())
        if m:
            parts = dict(zip(order, m.groups()))
            return "%04d-%02d-%02d" % (int(parts["y"]), int(parts["m"]), int(parts["d"]))
    raise ValueError("unrecognized date %r" % value)


columns, rows = read_rows(INPUT)
for r in rows:
    r["date"] = iso_date(str(r["date"]))
write_rows(OUTPUT, columns, rows)

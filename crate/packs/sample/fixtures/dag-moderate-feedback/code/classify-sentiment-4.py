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


INPUT = "inputs/feedback.csv"
OUTPUT = "out/feedback.csv"

import re

POSITIVE = {"good", "great", "excellent", "love"}

columns, rows = read_rows(INPUT)
for r in rows:
    words = set(re.findall(r"[a-z]+", str(r["text"]).lower()))
    r["label"] = "positive" if POSITIVE & words else "negative"
if "label" not in columns:
    columns.append("label")
write_rows(OUTPUT, columns, rows)

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


INPUT = "inputs/comments.jsonl"
OUTPUT = "out/comments.jsonl"

PROFANE = [
    "What the heck happened to the search page",
    "Darn slow delivery again this month",
    "This update is total crud",
    "Heck of a wait for a simple refund",
    "The new layout is crud on mobile",
]

columns, rows = read_rows(INPUT)
taken = {r["id"] for r in rows}
free = [i for i in range(1, 31) if i not in taken]
noise = [{"id": i, "text": PROFANE[n % len(PROFANE)]} for n, i in enumerate(free)]
write_rows(OUTPUT, columns, sorted(rows + noise, key=lambda r: r["id"]))

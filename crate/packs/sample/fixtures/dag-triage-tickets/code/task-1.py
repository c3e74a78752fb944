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


INPUT = "inputs/support_log.jsonl"
OUTPUT = "out/tickets.jsonl"

# step 1: dedup-exact
columns, rows = read_rows(INPUT)
seen = set()
kept = []
for r in rows:
    key = json.dumps(r, sort_keys=True)
    if key not in seen:
        seen.add(key)
        kept.append(r)
rows = kept

# step 2: refine-date
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


for r in rows:
    r["date"] = iso_date(str(r["date"]))

# step 3: classify-priority
import re

RULES = [("high", {"outage", "down", "urgent"}), ("medium", {"slow", "error"})]

for r in rows:
    words = set(re.findall(r"[a-z]+", str(r["subject"]).lower()))
    r["priority"] = next((label for label, keys in RULES if keys & words), "low")

write_rows(OUTPUT, columns, rows)

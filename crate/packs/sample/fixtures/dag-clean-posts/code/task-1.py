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


INPUT = "inputs/posts.jsonl"
OUTPUT = "out/comments.jsonl"

# step 1: filter-symbols
SYMBOLS = set("#$%@~")

columns, rows = read_rows(INPUT)
kept = [r for r in rows if not SYMBOLS & set(str(r["text"]))]
rows = kept

# step 2: refine-html
import re

TAG = re.compile(r"<[^>]+>")

for r in rows:
    r["text"] = " ".join(TAG.sub(" ", str(r["text"])).split())

# step 3: filter-profanity
import re

BLOCKED = {"darn", "heck", "crud"}

kept = [r for r in rows if not BLOCKED & set(re.findall(r"[a-z']+", str(r["text"]).lower()))]
rows = kept

write_rows(OUTPUT, columns, rows)

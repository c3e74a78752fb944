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


LEFT = "inputs/orders.csv"
RIGHT = "inputs/customers.csv"
OUTPUT = "out/orders_enriched.csv"

_, orders = read_rows(LEFT)
_, customers = read_rows(RIGHT)
by_id = {c["customer_id"]: c for c in customers}
joined = []
for o in orders:
    c = by_id.get(o["customer_id"], {})
    joined.append(dict(o, name=c.get("name", ""), city=c.get("city", "")))
write_rows(OUTPUT, ["order_id", "customer_id", "amount", "name", "city"], joined)

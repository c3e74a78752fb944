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


INPUT = "inputs/orders_enriched.csv"
ORDERS = "out/orders.csv"
CUSTOMERS = "out/customers.csv"

columns, rows = read_rows(INPUT)
write_rows(ORDERS, ["order_id", "customer_id", "amount"], rows)
customers = {}
for r in rows:
    customers.setdefault(r["customer_id"], r)
write_rows(CUSTOMERS, ["customer_id", "name", "city"], [customers[k] for k in sorted(customers)])

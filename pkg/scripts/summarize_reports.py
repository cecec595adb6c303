#!/usr/bin/env python3
"""把一次运行的 reports/*.json 汇总为 reports_summary.csv"""
import json
import sys
from pathlib import Path

import pandas as pd

if len(sys.argv) != 2:
    print("用法: python scripts/summarize_reports.py <run_dir>")
    sys.exit(1)

run_dir = Path(sys.argv[1])
rows = []
for path in sorted((run_dir / "reports").glob("*.json")):
    report = json.loads(path.read_text(encoding="utf-8"))
    rows.append(
        {
            "file": path.name,
            "name": report.get("name"),
            "variant": report.get("variant"),
            "side": report.get("side"),
            "t": report.get("t"),
            "L2": report.get("norms", {}).get("L2"),
            "Linf": report.get("norms", {}).get("Linf"),
            "scale": report.get("scale"),
        }
    )

table = pd.DataFrame(rows)
if not table.empty:
    table["relative"] = (table["Linf"] / table["scale"]).where(table["scale"] > 0, table["Linf"])
target = run_dir / "reports_summary.csv"
table.to_csv(target, index=False)
print(f"Wrote {target.name} with {len(rows)} reports")

# %% [markdown]
# Drive the command-line harness on a reduced scenario and average the CSV.
# Same thing as
#   risec --config small.toml --experiment power --system dfrc-rcg --no-timing --out power.csv

# %%
import tempfile
from pathlib import Path

from risec.cli import main
from risec.results import parse_csv

small = """
trials = 5
[scenario]
N = 4
M = 4
[sweeps]
power_dbm = [20.0, 30.0, 40.0]
"""

work = Path(tempfile.mkdtemp())
(work / "small.toml").write_text(small)
out = work / "power.csv"
code = main(["--config", str(work / "small.toml"), "--experiment", "power", "--system", "dfrc-rcg",
             "--no-timing", "--out", str(out)])
print("exit status", code)

# %% mean C_s per algorithm and power
rows = parse_csv(out.read_text())
table = {}
for r in rows:
    table.setdefault((r["algorithm"], r["param"]), []).append(r["C_s"] or 0.0)
for (alg, p), v in sorted(table.items()):
    print(f"{alg:16s} P={p:4.0f} dBm  mean C_s={sum(v) / len(v):.3f}  ({len(v)} trials)")

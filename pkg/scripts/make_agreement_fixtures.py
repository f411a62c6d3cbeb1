"""Write per-annotator CSV fixtures reconstructed from per-system agreement marginals.

Each system gets <name>_I.csv and <name>_II.csv so the merge path is exercised.
"""

import argparse
from pathlib import Path

from relex.evalkit import records_from_table, table_from_marginals, write_annotations

# n, correct by annotator I, by annotator II, by both
SYSTEMS = {
    "flan_t5": (50, 5, 4, 3),
    "mixtral": (50, 20, 18, 15),
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", nargs="?", default="tests/fixtures")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, marginals in SYSTEMS.items():
        table = table_from_marginals(*marginals)
        records = records_from_table(table, prefix=f"{name}-")
        for who in ("I", "II"):
            write_annotations([r for r in records if r.annotator == who], out / f"{name}_{who}.csv")
        print(name, table)


if __name__ == "__main__":
    main()

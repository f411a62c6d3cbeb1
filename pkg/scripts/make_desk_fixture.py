"""Write the 20-document desk fixture and run it end to end offline.

Produces corpus.jsonl, gazetteer.tsv and a recorded cache.jsonl, then replays
the cache through ``relex extract`` and runs one sample search.
"""

import argparse
from pathlib import Path

from relex.cli import main as relex
from relex.testing import write_desk_fixture


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", nargs="?", default="desk")
    ap.add_argument("--no-run", action="store_true", help="only write the fixture files")
    args = ap.parse_args()
    out = Path(args.out)
    paths = write_desk_fixture(out)
    for name, path in paths.items():
        print(f"{name:10s} {path}")
    if args.no_run:
        return 0
    store = out / "store.jsonl"
    if store.exists():
        store.unlink()
    code = relex(["extract", "--corpus", str(paths["corpus"]), "--gazetteer", str(paths["gazetteer"]),
                  "--store", str(store), "--work-dir", str(out / "work"), "--cache", str(paths["cache"]),
                  "--cache-mode", "replay-strict", "--model", "scripted-model"])
    if code:
        return code
    return relex(["search", "--store", str(store), "--documents", "rel=treatment arg2=coronavirus"])


if __name__ == "__main__":
    raise SystemExit(main())

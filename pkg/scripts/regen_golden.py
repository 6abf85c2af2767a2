"""Regenerate tests/golden from the bundled fixture with the mock backend.

Only run this after a deliberate change to mock rules, prompts or the fixture,
and read the diff before committing it.
"""

import argparse
import contextlib
import io
import shutil
import tempfile
from pathlib import Path

from csnpol import cli

ROOT = Path(__file__).resolve().parents[1]
FIXTURE = ROOT / "src" / "csnpol" / "data" / "russia_ukraine_30.jsonl"
GOLDEN = ROOT / "tests" / "golden"
FILES = ["triplets.jsonl", "background.json", "skipped.json", "csn.json", "coi.json", "coi.txt", "csn.dot"]


def run_chain(out: Path) -> None:
    """analyze -> build-csn -> coi -> export-dot, all written under ``out``."""
    def call(*argv):
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = cli.main(list(argv))
        if code:
            raise SystemExit(f"csnpol {' '.join(argv)} exited {code}")
        return buf.getvalue()

    call("analyze", str(FIXTURE), "--out-dir", str(out), "--no-resume")
    call("build-csn", str(out / "triplets.jsonl"), "-o", str(out / "csn.json"))
    (out / "coi.txt").write_text(call("coi", str(out / "csn.json"), "-o", str(out / "coi.json")), encoding="utf-8")
    call("export-dot", str(out / "csn.json"), "-o", str(out / "csn.dot"))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dest", type=Path, default=GOLDEN)
    args = ap.parse_args()
    args.dest.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        run_chain(Path(tmp))
        for name in FILES:
            shutil.copyfile(Path(tmp) / name, args.dest / name)
            print(f"wrote {args.dest / name}")


if __name__ == "__main__":
    main()

"""
End-to-end smoke run of the command line on the `smoke` template.

Runs every subcommand in order into a scratch directory:
    1. gen        -> base matrix text file
    2. sparsify   -> one sparsified text file per density
    3. trials     -> trials.csv + summary.csv
    4. threshold  -> thresholds.csv + traces/
    5. report     -> plot-data TSV files under report/

Optional env:
    SMOKE_OUT_DIR          where to write the run (default: a fresh temp dir)
    SPARSE_SENSE_WORKERS   worker processes for trials and threshold

Usage:
    python scripts/smoke_run.py
"""

import os
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT))


def main() -> int:
    out_dir = Path(os.environ.get("SMOKE_OUT_DIR") or tempfile.mkdtemp(prefix="sparse-sense-smoke-"))
    out_dir.mkdir(parents=True, exist_ok=True)

    # Import after sys.path setup so local modules resolve.
    from main import EXIT_OK, main as cli

    steps = [
        ["gen", "--config", "smoke", "--out", str(out_dir)],
        ["sparsify", "--config", "smoke", "--out", str(out_dir)],
        ["trials", "--config", "smoke", "--out", str(out_dir), "--quiet"],
        ["threshold", "--config", "smoke", "--out", str(out_dir), "--quiet"],
        ["report", "--input", str(out_dir / "smoke"), "--quiet"],
    ]
    for argv in steps:
        print(f"\n=== {argv[0]} ===")
        code = cli(argv)
        if code != EXIT_OK:
            print(f"ERROR: {argv[0]} exited with {code}", file=sys.stderr)
            return code

    expected = [
        "trials.csv",
        "summary.csv",
        "thresholds.csv",
        "report/recovery_curves.tsv",
        "report/threshold_vs_density.tsv",
    ]
    missing = [name for name in expected if not (out_dir / "smoke" / name).is_file()]
    if missing:
        print(f"ERROR: missing outputs: {', '.join(missing)}", file=sys.stderr)
        return 1

    print(f"\nSmoke run complete: {out_dir / 'smoke'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

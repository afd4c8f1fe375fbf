"""
Master script that regenerates every dataset in sequence.
Stiffness sweeps, the approximation-ratio study and the convergence
experiments are written as CSV artifacts into one output directory.
"""

import argparse
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from slip.cli import build_parser, config_from_args, run_command, EXIT_OK
from slip.errors import SlipError
from slip.output_utils import banner, error, ok, status

# (label, output file, CLI arguments)
STEPS: List[Tuple[str, str, List[str]]] = [
    ("K* VERSUS ALPHA (U = 1, V = 0.1)", "sweep_alpha.csv",
     ["sweep", "--alpha", "0.2:0.8:7", "--U", "1", "--V", "0.1"]),
    ("K* VERSUS U (ALPHA = 0.4, V = 0.1)", "sweep_U.csv",
     ["sweep", "--alpha", "0.4", "--U", "0.8:2.6:10", "--V", "0.1"]),
    ("FAST-SCALE ERROR ON [0, PI]", "verify_fast.csv",
     ["verify", "fast", "--alpha", "0.4", "--U", "1", "--V", "0.1"]),
    ("FAST-SCALE ERROR ON THE EXPANDING INTERVAL", "verify_expanding.csv",
     ["verify", "fast", "--expanding", "--alpha", "0.4", "--U", "1", "--V", "0.1"]),
    ("SLOW-SCALE ERROR ON [0, 1]", "verify_slow.csv",
     ["verify", "slow", "--alpha", "0.4", "--U", "1", "--V", "0.1"]),
    ("RETURN-TIME ORDER", "verify_tstar.csv",
     ["verify", "tstar", "--alpha", "0.4", "--U", "1", "--V", "0.1"]),
    ("K*/K~* RATIO AS ALPHA DECREASES", "verify_kratio.csv",
     ["verify", "kratio", "--alphas", "0.05,0.1,0.2,0.4", "--U", "1", "--V", "0.1"]),
]


def reproduce_all(out_dir: str, workers: int = 1, only: Optional[Sequence[str]] = None) -> dict:
    """
    Run every step, recording success per output file.

    Args:
        out_dir: Directory receiving the artifacts
        workers: Worker processes for sweeps and experiments
        only: Output file names to restrict the run to

    Returns:
        Mapping of output file name to success flag
    """
    parser = build_parser()
    results = {}
    steps = [s for s in STEPS if not only or s[1] in only]
    for index, (label, filename, argv) in enumerate(steps, start=1):
        status("")
        banner(f"STEP {index}/{len(steps)}: {label}")
        argv = list(argv)
        if argv[0] in ("verify", "sweep"):
            argv += ["--workers", str(workers)]
        config = config_from_args(parser.parse_args(argv))
        started = time.time()
        try:
            code = run_command(argv[0], config, str(Path(out_dir) / filename))
            results[filename] = code == EXIT_OK
        except SlipError as e:
            error(f"{filename}: {type(e).__name__}: {e.message}")
            results[filename] = False
        elapsed = time.time() - started
        if results[filename]:
            ok(f"{filename} completed in {elapsed:.1f} s")
        else:
            error(f"{filename} failed after {elapsed:.1f} s")
    return results


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Regenerate every dataset")
    parser.add_argument("--out-dir", default="results", help="Output directory")
    parser.add_argument("--workers", type=int, default=1, help="Worker processes")
    parser.add_argument("--only", nargs="*", default=None, help="Restrict to these output files")
    args = parser.parse_args(argv)

    banner("Stance-phase datasets - full reproduction")
    status(f"Writing {len(STEPS)} artifacts into {args.out_dir}")
    start_time = time.time()
    results = reproduce_all(args.out_dir, args.workers, args.only)

    total_time = time.time() - start_time
    status("")
    banner("REPRODUCTION COMPLETE")
    status(f"Total time: {total_time / 60:.1f} minutes")
    status("\nResults:")
    for filename, success in results.items():
        status(f"  {filename:<24} {'[OK]' if success else '[ERROR]'}")
    return 0 if all(results.values()) else 1


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""
Master script that runs the acceptance sweeps through the ds2wb CLI
"""

import argparse
import logging
import subprocess
import sys
from datetime import datetime
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent
OUTPUT_DIR = BASE_DIR / "output" / "acceptance"
CLI = str(BASE_DIR / "ds2wb.py")
TIMEOUT = 900

# Setup logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s | %(levelname)-8s | %(message)s",
    handlers=[
        logging.FileHandler(BASE_DIR / "acceptance.log"),
        logging.StreamHandler(),
    ],
)


def run_job(args, description):
    """Run one ds2wb command and log the result"""
    command = [sys.executable, CLI, *args, "--out-dir", str(OUTPUT_DIR)]
    try:
        logging.info(f"Starting {description}...")
        result = subprocess.run(command, capture_output=True, text=True, timeout=TIMEOUT)

        for line in result.stdout.splitlines():
            logging.info(f"    {line}")
        if result.returncode == 0:
            logging.info(f"✅ {description} passed")
            return True
        if result.returncode == 1:
            logging.error(f"❌ {description} detected a property violation")
        else:
            logging.error(f"❌ {description} failed with exit code {result.returncode}")
        logging.error(f"Error output: {result.stderr}")
        return False

    except subprocess.TimeoutExpired:
        logging.error(f"❌ {description} timed out after {TIMEOUT} seconds")
        return False
    except Exception as e:
        logging.error(f"❌ {description} failed with exception: {e}")
        return False


def acceptance_jobs(workers, quick):
    grid = "6x6" if quick else "20x20"
    l_desc = str(OUTPUT_DIR / "acc_L.json")
    rect_desc = str(OUTPUT_DIR / "acc_rect.json")
    jobs = [
        (["gbcheck", "--random-triangles", "100", "--seed", "1"], "Gauss-Bonnet on random triangles"),
        (["build", "--theta", "1.0", "--x", "1.5", "--y", "0.5", "--stem", "acc_L"], "L torus invariants"),
        (["build", "--rect", "--theta", "1.0", "--l", "1.2", "--twist", "0.25", "--stem", "acc_rect"], "Rectangle torus invariants"),
        (["gbcheck", "--random-triangles", "10", "--descriptor", l_desc], "Torus area equals cone angle"),
        (["foliation", "--descriptor", l_desc, "--cesaro", "5000"], "Asymptotic cycles and class A"),
        (["spectrum", "--descriptor", l_desc, "--window", "3", "--workers", str(workers)], "Marked length spectrum"),
        (["invert", "--theta", "1.0", "--l", "1.2", "--twist", "0.3"], "Length-twist round trip"),
        (["coords", "--descriptor", rect_desc], "Rectangle torus coordinates"),
        (["rigidity", "--theta", "1.0", "--grid", grid, "--workers", str(workers)], "Two-length rigidity"),
        (["render", "--descriptor", l_desc, "--leaves", "12", "--geodesic", "1,0"], "Polygon figure"),
    ]
    if not quick:
        for l in ("0.3", "1.5", "3.0"):
            for twist in ("-2.0", "-0.5", "0.75", "1.9"):
                jobs.append((["invert", "--theta", "1.0", "--l", l, "--twist", twist], f"Round trip at l={l}, twist={twist}"))
    return jobs


def main():
    parser = argparse.ArgumentParser(description=__doc__.strip())
    parser.add_argument("--workers", type=int, default=4)
    parser.add_argument("--quick", action="store_true", help="small rigidity grid, no round-trip sweep")
    opts = parser.parse_args()

    OUTPUT_DIR.mkdir(parents=True, exist_ok=True)
    start_time = datetime.now()
    logging.info("🚀 Starting ds2wb acceptance sweeps")

    results = {}
    for args, description in acceptance_jobs(opts.workers, opts.quick):
        results[description] = run_job(args, description)

    # Summary
    duration = datetime.now() - start_time

    logging.info("=" * 50)
    logging.info("📊 ACCEPTANCE SUMMARY")
    logging.info("=" * 50)

    passed = sum(results.values())
    total = len(results)

    for description, success in results.items():
        status = "✅ PASS" if success else "❌ FAIL"
        logging.info(f"{description}: {status}")

    logging.info(f"Completed {passed}/{total} sweeps successfully")
    logging.info(f"Total duration: {duration}")

    if passed == total:
        logging.info("🎉 All acceptance sweeps passed!")
        return 0
    logging.error(f"⚠️  {total - passed} sweeps failed")
    return 1


if __name__ == "__main__":
    exit_code = main()
    sys.exit(exit_code)

#!/usr/bin/env python3
"""
Acceptance Campaign Script
Runs the rate study and the verification campaigns described by the JSON configs in manifests/
through the elastica-mle command line and checks the headline numbers.
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path

# Add project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

SLOPE_RANGE = (-0.65, -0.35)
MIN_COVERAGE = 0.86

CAMPAIGNS = [
    ("rate study", ["rate-study"], "rate_study.json"),
    ("coverage", ["verify", "coverage"], "coverage.json"),
    ("OU concentration", ["verify", "ou-concentration"], "concentration.json"),
    ("decoupling", ["verify", "decoupling"], "coupling.json"),
    ("mean process", ["verify", "mean-process"], "mean_process.json"),
    ("denominator", ["verify", "denominator"], "concentration.json"),
]


def run_campaign(name, command, config_name, out_root, threads):
    """Run one campaign in a subprocess, logging to its output directory."""
    out_dir = out_root / command[-1]
    out_dir.mkdir(parents=True, exist_ok=True)
    cmd = [sys.executable, "-m", "cli.main", *command, "--config", str(project_root / "manifests" / config_name)]
    cmd += ["--out", str(out_dir), "--threads", str(threads)]

    print(f"🚀 Running {name} ({config_name})...")
    with open(out_dir / "run.log", "w") as log_handle:
        result = subprocess.run(cmd, cwd=project_root, stdout=log_handle, stderr=subprocess.STDOUT, text=True)
    return result.returncode, out_dir


def check_rate_study(out_dir):
    table = json.loads((out_dir / "rate_table.json").read_text())
    slope = table["fitted_slope"]
    low, high = SLOPE_RANGE
    print(f"   fitted slope {slope:.3f} (accepted range [{low}, {high}])")
    return low <= slope <= high


def check_coverage(out_dir):
    report = json.loads((out_dir / "verification.json").read_text())
    print(f"   coverage {report['coverage']:.3f} (required {MIN_COVERAGE})")
    return report["coverage"] >= MIN_COVERAGE


def main():
    parser = argparse.ArgumentParser(description="Run the acceptance campaigns")
    parser.add_argument("--out", default="runs/acceptance", help="Output root (default: runs/acceptance)")
    parser.add_argument("--threads", type=int, default=4, help="Worker threads per campaign")
    args = parser.parse_args()

    out_root = project_root / args.out
    print("🔬 Acceptance campaigns")
    print("=" * 50)

    failures = []
    for name, command, config_name in CAMPAIGNS:
        code, out_dir = run_campaign(name, command, config_name, out_root, args.threads)
        ok = code == 0
        if ok and command[0] == "rate-study":
            ok = check_rate_study(out_dir)
        elif ok and command[-1] == "coverage":
            ok = check_coverage(out_dir)
        if ok:
            print(f"✅ {name} passed")
        else:
            print(f"❌ {name} failed (exit code {code}, see {out_dir / 'run.log'})")
            failures.append(name)

    print("=" * 50)
    if failures:
        print(f"❌ {len(failures)} campaign(s) failed: {', '.join(failures)}")
        return 1
    print("🎉 All acceptance campaigns passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""
Smoke Test Script

Prints the effective lab settings and runs the fast verification checks.
Used to confirm the numerical stack works before launching long training runs.

Exit codes:
  0 - every check passed
  1 - a dependency import or a check failed
"""
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import settings
from src.logging_config import get_logger, setup_logging

setup_logging()
logger = get_logger(__name__)

# detailed-balance runs a million-step chain; leave it to `ebm-lab verify`
SLOW_CHECKS = ("detailed-balance",)


def print_config():
    """Print effective lab configuration."""
    print("\n" + "=" * 60)
    print("EBM LAB CONFIGURATION")
    print("=" * 60)

    config = {
        "LOG_LEVEL": settings.LOG_LEVEL,
        "LOG_FORMAT": settings.LOG_FORMAT,
        "OUTPUT_ROOT": settings.OUTPUT_ROOT,
        "DEFAULT_SEED": settings.DEFAULT_SEED,
        "METRICS_ENABLED": settings.METRICS_ENABLED,
        "CLAIMS_LEDGER_PATH": settings.CLAIMS_LEDGER_PATH,
        "DIVERGENCE_SCORE_LIMIT": settings.DIVERGENCE_SCORE_LIMIT,
        "GRID_MAX_DIM": settings.GRID_MAX_DIM,
        "ENUMERATION_LIMIT": settings.ENUMERATION_LIMIT,
    }
    for key, value in config.items():
        print(f"  {key:35s} = {value}")

    print("=" * 60 + "\n")


def test_imports():
    """Check the numerical and monitoring dependencies import."""
    try:
        import numpy as np

        print(f"✓ numpy imported (version: {np.__version__})")
        import prometheus_client  # noqa: F401

        print("✓ prometheus_client imported")
    except ImportError as e:
        print(f"✗ import failed: {e}")
        print("  Hint: run 'pip install -r requirements.txt'")
        return False
    return True


def run_fast_checks():
    from src.services.verification import CHECKS, run_checks

    ok = True
    for name in (n for n in CHECKS if n not in SLOW_CHECKS):
        (result,) = run_checks(name, seed=settings.DEFAULT_SEED)
        mark = "✓" if result.passed else "✗"
        print(f"{mark} {name:28s} error={result.error:.3e} tolerance={result.tolerance:.1e}")
        ok = ok and result.passed
    return ok


def main():
    """Main test routine."""
    print("\n" + "=" * 60)
    print("EBM LAB SMOKE TEST")
    print("=" * 60 + "\n")

    print_config()

    success = test_imports() and run_fast_checks()

    print("\n" + "=" * 60)
    if success:
        print("✓ SMOKE TEST PASSED")
        print("=" * 60 + "\n")
        print("You can now train with: ebm-lab train --config <run.json>\n")
        return 0

    print("✗ SMOKE TEST FAILED")
    print("=" * 60 + "\n")
    print("Troubleshooting:")
    print("  1. Check that all required dependencies are installed:")
    print("     pip install -r requirements.txt")
    print("  2. Re-run a single check with details: ebm-lab verify --check <name>")
    print("  3. Inspect runs/verify_report.json for the measured errors\n")
    logger.error("Smoke test failed")
    return 1


if __name__ == "__main__":
    sys.exit(main())

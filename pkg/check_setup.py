#!/usr/bin/env python3
"""
Setup checker for the BAFO auction engine
Verifies dependencies, configuration and that a preset experiment runs
"""

import os
import sys
from pathlib import Path

SRC = Path(__file__).parent / "src"


def check_python_version():
    """Check Python version"""
    print("Checking Python version...")
    version = sys.version_info
    if version >= (3, 9):
        print(f"  ✓ Python {version.major}.{version.minor}.{version.micro} (OK)")
        return True
    print(f"  ✗ Python {version.major}.{version.minor}.{version.micro} (Need 3.9+)")
    return False


def check_dependencies():
    """Check if required packages are installed"""
    print("\nChecking dependencies...")

    required = ["numpy", "reportlab", "PyPDF2", "pytest"]
    missing = []

    for package in required:
        try:
            __import__(package)
            print(f"  ✓ {package}")
        except ImportError:
            print(f"  ✗ {package} (MISSING)")
            missing.append(package)

    if missing:
        print(f"\n  Missing packages: {', '.join(missing)}")
        print("\n  Install with: pip install -r src/requirements.txt")
        return False
    return True


def check_configuration():
    """Report solver limits taken from the environment"""
    print("\nChecking configuration...")
    settings = {
        "BAFO_WORK_BUDGET": "2000000",
        "BAFO_MAX_SELLERS": "20",
        "BAFO_GS_GRID_LIMIT": "2000000",
    }
    all_ok = True
    for name, default in settings.items():
        raw = os.getenv(name)
        try:
            value = int(raw if raw is not None else default)
        except ValueError:
            print(f"  ✗ {name}={raw!r} is not an integer")
            all_ok = False
            continue
        source = "set" if raw is not None else "default"
        print(f"  ✓ {name} = {value:,} ({source})")
    return all_ok


def check_files():
    """Check if required files exist"""
    print("\nChecking required files...")

    required_files = [
        "bafo_cli.py",
        "modules/valuation_core.py",
        "modules/game_tree.py",
        "modules/nyb_auction.py",
        "modules/descending_auction.py",
        "presets/named_instances.py",
        "backend/instance_io.py",
        "backend/experiment_runner.py",
        "backend/pdf_generator.py",
    ]

    all_ok = True
    for file_path in required_files:
        if (SRC / file_path).exists():
            print(f"  ✓ src/{file_path}")
        else:
            print(f"  ✗ src/{file_path} (MISSING)")
            all_ok = False
    return all_ok


def check_smoke_run():
    """Run the cost-gap experiment for four sellers"""
    print("\nRunning cost-gap smoke test...")
    sys.path.insert(0, str(SRC))
    try:
        from backend.experiment_runner import ExperimentRunner
        report = ExperimentRunner().run("cost-gap", n=4)
    except Exception as e:
        print(f"  ✗ {e}")
        return False
    passed = sum(check["passed"] for check in report["checks"])
    mark = "✓" if report["passed"] else "✗"
    print(f"  {mark} {passed}/{len(report['checks'])} checks passed")
    return report["passed"]


def main():
    """Run all checks"""
    print("=" * 60)
    print("BAFO Auctions - Setup Checker")
    print("=" * 60)

    checks = [
        check_python_version(),
        check_dependencies(),
        check_configuration(),
        check_files(),
    ]
    if checks[1]:
        checks.append(check_smoke_run())

    print("\n" + "=" * 60)

    if all(checks):
        print("✓ All checks passed!")
        print("\nTry:")
        print("  python src/bafo_cli.py experiment chopsticks")
        print("\nOr run the tests:")
        print("  pytest")
        print("=" * 60)
        return 0
    print("✗ Some checks failed. Please fix the issues above.")
    print("=" * 60)
    return 1


if __name__ == "__main__":
    sys.exit(main())

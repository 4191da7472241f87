"""
Setup script for the Jacobi bracket checker
This script installs the dependencies and runs a quick smoke check
"""

import subprocess
import sys
from pathlib import Path

REQUIRED_FILES = [
    "cli.py",
    "config.py",
    "errors.py",
    "tensor_core.py",
    "fields.py",
    "bracket_engine.py",
    "jacobi_verifier.py",
    "dynamics.py",
    "structure_tools.py",
    "requirements.txt",
    "scenarios/free_particle.json",
    "scenarios/divergent_B.json",
]


STEPS = [
    ("📦 Installing required packages", ["-m", "pip", "install", "-r", "requirements.txt"]),
    ("📊 Counting polynomial bracket conditions", ["cli.py", "count", "--quiet"]),
    ("🧪 Checking the free particle scenario", ["cli.py", "check", "scenarios/free_particle.json", "--quiet"]),
]


def missing_modules():
    """Modules and bundled scenarios that are not in the working directory"""
    return [name for name in REQUIRED_FILES if not Path(name).exists()]


def run_step(label, args):
    print(f"\n{label}...")
    result = subprocess.run([sys.executable, *args])
    if result.returncode != 0:
        print(f"❌ {' '.join(args)} exited with {result.returncode}")
        return False
    print(f"✅ {' '.join(args)}")
    return True


def main():
    """Main setup function"""
    print("🧮 Jacobi Bracket Checker - Setup")
    print("=" * 50)

    if not Path("cli.py").exists():
        print("❌ Please run this script from the project directory!")
        return

    missing = missing_modules()
    if missing:
        print(f"❌ Setup cannot continue, missing: {', '.join(missing)}")
        return

    for label, args in STEPS:
        if not run_step(label, args):
            print("\n❌ Setup stopped.")
            return

    print("\n🎉 Setup completed successfully!")
    print("\n🚀 To check a scenario:")
    print("   python cli.py check scenarios/potential_em.json")
    print("\n🧪 To run the test suite:")
    print("   python -m pytest")
    print("\n⏱️  To time the bundled scenarios:")
    print("   python performance_test.py")


if __name__ == "__main__":
    main()

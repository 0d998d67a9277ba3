"""
Command-Line Entry Point - dynoct

Run with: python app.py <subcommand> [flags]
Subcommands: bench, svgd, knn, index, metrics, validate, neighbors
"""

import sys
from pathlib import Path

# Add project paths
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.cli import dispatch


def main():
    """Main application entry point"""
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""
geninv command-line entry point. See `python main.py --help`.
"""

from geninv.cli import main


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""
Bell-Bloom Magnetometer Simulator - Main Entry Point
Simulate squeezed-light-probed Bell-Bloom magnetometers and analyse their noise spectra
"""

import logging
import sys

from ui.interface import create_cli_app
from utils.helpers import run_subcommand


def main(argv=None):
    args = create_cli_app().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    path, status = run_subcommand(args)
    print(status)
    return 0 if path is not None else 1


if __name__ == "__main__":
    sys.exit(main())

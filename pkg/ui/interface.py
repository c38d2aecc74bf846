"""
Command-line interface for the magnetometer simulator
"""

import argparse

from config.settings import profile_aliases, profile_options
from utils.helpers import SUBCOMMANDS

_HELP = {
    "simulate": "simulate records and write the demodulated u and v spectra",
    "calibrate": "field scan around resonance and fit the slope dv/dB",
    "respond": "inject field tones and fit the responsivity bandwidth",
    "sensitivity": "magnetic sensitivity spectrum S_B with the probe as configured",
    "abtest": "scale only the S3 noise and compare Var(Fx) against the S_v plateau",
    "analytic": "write the closed-form model curves without simulating",
}


def _add_common(parser):
    parser.add_argument("--config", help="flat JSON config file (decimal SI units)")
    parser.add_argument("--profile", choices=sorted([*profile_options, *profile_aliases]), default="desk",
                        help="named parameter profile the config file overrides")
    parser.add_argument("--seed", type=int, help="master seed for every record stream")
    parser.add_argument("--squeeze-db", type=float, dest="squeeze_db",
                        help="probe squeezing in dB below shot noise")
    parser.add_argument("--records", type=int, help="number of records to average")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--workers", type=int, default=1, help="worker processes for record generation")
    parser.add_argument("--xlsx", action="store_true", help="also write an XLSX workbook")
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")


def create_cli_app():
    """Create and configure the argument parser."""
    parser = argparse.ArgumentParser(
        prog="bellbloom",
        description="Bell-Bloom magnetometer noise simulator with squeezed-light probing",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name, help=_HELP[name])
        _add_common(sub)
        if name == "simulate":
            sub.add_argument("--dump-trajectory", action="store_true", dest="dump_trajectory",
                             help="write t, Fx, Fy, Fz of the first record")
        if name in ("calibrate", "respond"):
            choices = ("analytic", "noiseless", "simulate") if name == "calibrate" else ("noiseless", "simulate")
            sub.add_argument("--mode", choices=choices, default="noiseless")
        if name == "sensitivity":
            sub.add_argument("--compare", action="store_true",
                             help="paired coherent and squeezed runs")
    return parser

"""
Helper functions for the magnetometer simulator command line
"""

import logging

from config.model import MagnetometerError
from config.settings import load_config
from experiments.runner import (
    analytic_curves,
    backaction_ab_test,
    field_scan_calibration,
    responsivity_sweep,
    sensitivity_run,
    simulate_spectra,
    squeezing_comparison,
)
from generators.data_generator import SyntheticRecordGenerator
from .tables import TableWriter

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("simulate", "calibrate", "respond", "sensitivity", "abtest", "analytic")


def config_overrides(args):
    """Config keys set explicitly on the command line."""
    return {
        "seed": getattr(args, "seed", None),
        "squeezing_db": getattr(args, "squeeze_db", None),
        "n_records": getattr(args, "records", None),
    }


def _run_simulate(config, args, generator):
    return simulate_spectra(config, generator, dump_trajectory=getattr(args, "dump_trajectory", False))


def _run_calibrate(config, args, generator):
    _, report = field_scan_calibration(config, mode=getattr(args, "mode", "noiseless"), generator=generator)
    return report


def _run_respond(config, args, generator):
    _, _, report = responsivity_sweep(config, mode=getattr(args, "mode", "noiseless"), generator=generator)
    return report


def _run_sensitivity(config, args, generator):
    if getattr(args, "compare", False):
        return squeezing_comparison(config, generator=generator)
    _, report = sensitivity_run(config, squeeze=config.probe.squeezing_db > 0, generator=generator)
    return report


def _run_abtest(config, args, generator):
    return backaction_ab_test(config, generator=generator)


def _run_analytic(config, args, generator):
    return analytic_curves(config)


_DISPATCH = {
    "simulate": _run_simulate,
    "calibrate": _run_calibrate,
    "respond": _run_respond,
    "sensitivity": _run_sensitivity,
    "abtest": _run_abtest,
    "analytic": _run_analytic,
}


def run_subcommand(args):
    """Run one subcommand and write its outputs; always returns (report path, status)."""
    try:
        if args.command not in _DISPATCH:
            return None, f"❌ Error: Unsupported subcommand: {args.command}"
        config = load_config(getattr(args, "config", None), getattr(args, "profile", "desk"),
                             config_overrides(args))
        generator = SyntheticRecordGenerator(workers=getattr(args, "workers", 1))
        report = _DISPATCH[args.command](config, args, generator)
        path = TableWriter(args.out).write_all(report, xlsx=getattr(args, "xlsx", False))
        failed = sorted(name for name, passed in report.checks.items() if not passed)
        if failed:
            return path, f"✅ {args.command} finished; checks not met: {', '.join(failed)}"
        return path, f"✅ {args.command} finished, report written to {path}"
    except (MagnetometerError, OSError) as e:
        logger.error("%s failed: %s", args.command, e)
        return None, f"❌ Error: {e}"
    except Exception as e:
        # Always hand back a (path, status) pair, even for unexpected failures.
        logger.exception("unexpected error in %s", args.command)
        return None, f"❌ Error: {e}"

"""Utilities package: command dispatch and table output."""

from .helpers import run_subcommand
from .tables import TableWriter

__all__ = ['run_subcommand', 'TableWriter']

"""UI package for the command-line interface."""

from .interface import create_cli_app

__all__ = ['create_cli_app']

"""Generators package: spin dynamics, polarimeter readout and record batching."""

from .data_generator import SyntheticRecordGenerator

__all__ = ['SyntheticRecordGenerator']

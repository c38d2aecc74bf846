"""
Core synthetic record generator
Orchestrates spin integration, polarimeter readout and lock-in demodulation
"""

import logging
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from analysis.dsp import demodulate
from .probe_generator import readout
from .spin_generator import simulate_lanes

logger = logging.getLogger(__name__)


def _generate_slice(plan, inputs, demod, record_indices, fields, keep_trajectories):
    trajectories = simulate_lanes(plan, inputs, record_indices, fields)
    if demod is None:
        return trajectories, None
    demodulated = [demodulate(readout(traj), inputs.pump.f_mod, demod) for traj in trajectories]
    return (trajectories if keep_trajectories else None), demodulated


class SyntheticRecordGenerator:
    """Generates independent records, optionally across worker processes.

    Every record draws from its own (seed, record index) stream, so the output
    does not depend on the number of workers.
    """

    def __init__(self, workers=1):
        self.workers = max(1, int(workers))

    def _run(self, plan, inputs, demod, record_indices, fields, keep_trajectories):
        if record_indices is None:
            record_indices = list(range(plan.n_records))
        record_indices = [int(i) for i in record_indices]
        if fields is None:
            fields = [inputs.field] * len(record_indices)
        logger.info("generating %d records (%d worker%s)", len(record_indices), self.workers,
                    "" if self.workers == 1 else "s")

        if self.workers == 1 or len(record_indices) < 2:
            return _generate_slice(plan, inputs, demod, record_indices, fields, keep_trajectories)

        bounds = np.array_split(np.arange(len(record_indices)), min(self.workers, len(record_indices)))
        trajectories, demodulated = [], []
        with ProcessPoolExecutor(max_workers=self.workers) as pool:
            futures = [
                pool.submit(_generate_slice, plan, inputs, demod,
                            [record_indices[i] for i in part], [fields[i] for i in part],
                            keep_trajectories)
                for part in bounds if part.size
            ]
            for future in futures:
                traj, demod_records = future.result()
                trajectories.extend(traj or [])
                demodulated.extend(demod_records or [])
        return (trajectories or None), (demodulated if demod is not None else None)

    def generate_trajectories(self, plan, inputs, record_indices=None, fields=None):
        """Spin trajectories for the requested records."""
        trajectories, _ = self._run(plan, inputs, None, record_indices, fields, True)
        return trajectories

    def generate_demodulated(self, plan, inputs, demod, record_indices=None, fields=None,
                             keep_trajectories=False):
        """Lock-in outputs (and optionally the trajectories) for the requested records."""
        trajectories, demodulated = self._run(plan, inputs, demod, record_indices, fields,
                                              keep_trajectories)
        return demodulated, trajectories

"""Counter-based random streams keyed by (seed, record index, stream)."""

import numpy as np

SPIN_STREAM = 0
PROBE_STREAM = 1


def record_stream(seed, record_index, stream):
    """Independent Philox generator for one record and one noise source.

    Streams never overlap, so records can be generated in any order or in
    parallel and still reproduce the serial result.
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(record_index), int(stream)))
    return np.random.Generator(np.random.Philox(sequence))

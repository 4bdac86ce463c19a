from __future__ import annotations

from .pathgraph import NORMALIZED, UNNORMALIZED, active_fraction, apl, enw, sink_histogram
from .tensornet.export import CHANNEL, network_mask, network_to_dag


def structure_metrics(net, mask=None, granularity=CHANNEL) -> dict:
    """Active fraction, ENW, APL and NAPL of a network under ``mask``
    (defaults to the network's current activity)."""
    mask = network_mask(net) if mask is None else mask
    dag = network_to_dag(net, mask, granularity)
    return {
        "active_fraction": active_fraction(mask),
        "enw": enw(mask),
        "apl": apl(sink_histogram(dag, UNNORMALIZED)),
        "napl": apl(sink_histogram(dag, NORMALIZED)),
    }

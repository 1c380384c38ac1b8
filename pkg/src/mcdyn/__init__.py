"""Bounded-parameter learning machines trained by Monte Carlo descent.

Modules:

* ``dynsys``: Lorenz and limit-cycle targets, RK4 integration, parameter scans
* ``machine``: the delayed-scalar and vector machines, free runs, checkpoint format
* ``trainer``: sample construction, cached Monte Carlo training, schedules
* ``analysis``: Poincare sections, clustering, bifurcation diagrams, cubic
  expansion, periodograms
* ``ingest``: light-curve CSV loading, gap segmentation, normalisation
* ``cli``: the ``mcdyn`` command
"""

from .errors import MCDynError
from .timeseries import TimeSeries

__all__ = ["MCDynError", "TimeSeries"]
__version__ = "0.1.0"

"""Causal-boundary obstructions to conformal extensions of static and FLRW spacetimes.

Modules:

- ``surfaces``: spatial slices (plane, cylinder, warped products, the
  grapefruit-on-a-stick cover) and metric grids over them
- ``geodesic``: distance fields on grids, plus a Clairaut oracle
- ``boundary``: Gromov and Busemann points, the coincidence test, ends
- ``ipspace``: a discrete causal grid with IPs, the metrics and time functions
- ``cosmo``: integral criteria and obstruction reports
- ``scene`` and ``cli``: scene files and the ``horizon`` command
"""

__version__ = "0.1.0"

from .errors import HorizonError  # noqa: E402
from .expr import ScaleFactorSpec  # noqa: E402
from .surfaces import make_surface, sample_grid  # noqa: E402

__all__ = ["HorizonError", "ScaleFactorSpec", "__version__", "make_surface", "sample_grid"]

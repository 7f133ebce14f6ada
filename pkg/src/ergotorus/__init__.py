"""ergotorus: random walks on the torus driven by integer matrices.

Simulation with a reproducible counter-based stream, exact transfer-operator
enumeration for small horizons, diophantine height and drift diagnostics,
Fourier/Wasserstein equidistribution measurement, and CLT/LIL test batteries.
"""

__version__ = "0.1.0"

from . import (  # noqa: E402,F401
    config,
    degeneracy,
    diophantine,
    errors,
    limits,
    poisson,
    spectral,
    torus,
    walk,
)

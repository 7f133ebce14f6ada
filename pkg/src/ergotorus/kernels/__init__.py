"""Hot-loop kernels: compiled extension when available, numpy otherwise.

`BACKEND` names the selected implementation.  Only `walk_block` and
`u_delta_sum` are backend-switched; the cheap counter-RNG helpers always
come from the numpy module so auxiliary draws never depend on the backend.
The two walk_block implementations agree bit for bit (tested), so results
do not depend on which backend happened to build.
"""

from ._walk_py import (
    MASK64,
    atom_choices,
    counter_uniforms,
    mix64,
    step_uniforms,
    trial_bases,
)
from ._walk_py import u_delta_sum as u_delta_sum_py
from ._walk_py import walk_block as walk_block_py

try:
    from . import _walk_cy as _impl

    BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on build environment
    from . import _walk_py as _impl

    BACKEND = "python"

walk_block = _impl.walk_block
u_delta_sum = _impl.u_delta_sum

__all__ = [
    "BACKEND",
    "MASK64",
    "atom_choices",
    "counter_uniforms",
    "mix64",
    "step_uniforms",
    "trial_bases",
    "u_delta_sum",
    "u_delta_sum_py",
    "walk_block",
    "walk_block_py",
]

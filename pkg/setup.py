"""Build script: compiles the optional fast kernels.

The package works without the extension (a numpy fallback is selected at
import time), so a missing C toolchain only costs speed, not correctness.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "ergotorus.kernels._walk_cy",
                ["src/ergotorus/kernels/_walk_cy.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off: the numpy fallback performs plain
                # mul/add; FMA contraction here would break bit-identical
                # agreement between the two backends.
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)

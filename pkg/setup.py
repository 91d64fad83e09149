"""Build script: compiles the optional Cython stepping kernel.

The compiled kernel is a pure speedup; if Cython or a C compiler is
unavailable the package falls back to the pure-Python twin in
snapnet._core.pykernel at import time.

`-ffp-contract=off` keeps the compiled kernel bit-identical to the
Python fallback (no fused multiply-adds).
"""

import os

from setuptools import setup

extensions = []
if os.path.exists("src/snapnet/_core/kernel.pyx"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools.extension import Extension

        extensions = cythonize(
            [
                Extension(
                    "snapnet._core.kernel",
                    ["src/snapnet/_core/kernel.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        extensions = []

setup(ext_modules=extensions)

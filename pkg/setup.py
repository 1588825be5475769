"""Build script: compiles the C kernel core when Cython is available.

The package works without the extension (a pure-Python backend is selected
at import time), but the experiment sweeps are impractically slow that way.
"""

import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and os.path.exists("src/taperbench/_ckernels.pyx"):
    import numpy

    ext_modules = cythonize(
        [
            Extension(
                "taperbench._ckernels",
                ["src/taperbench/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)

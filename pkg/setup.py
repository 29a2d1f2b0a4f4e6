"""Build script: compiles the optional Cython kernel.

The package is fully functional without the extension (a vectorised numpy
fallback is selected at import time), so any failure to build the extension
degrades gracefully to a pure-Python install.
"""

import os

from setuptools import Extension, setup

try:
    if not os.path.exists("src/billiard_lab/_kernels/_core.pyx"):
        raise ImportError("kernel source missing; pure-python install")
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "billiard_lab._kernels._core",
                ["src/billiard_lab/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)

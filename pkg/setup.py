"""Build the optional compiled kernels; the package runs without them."""
import os
import warnings

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("PULSEFRONT_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython not found; installing the pure-Python kernels only.")
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "pulsefront._kernels_ext",
                    ["src/pulsefront/_kernels_ext.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)

"""Build script for the optional compiled propagation kernels.

The package works without the extension: ``qgc._backend`` falls back to a
NumPy implementation when ``qgc._kernels`` cannot be imported.
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("QGC_NO_EXTENSION", "0") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "qgc._kernels",
                    ["src/qgc/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)

"""Build script for the optional compiled propagation kernel.

The extension is optional: if Cython or a C compiler is missing the package
installs without it and falls back to the numpy implementation.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("CAVITYQC_NO_EXTENSION"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "cavityqc._kernels",
                    ["src/cavityqc/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)

"""Build script: compiles the scan kernel when Cython and a C compiler exist.

The extension is optional; without it the package falls back to the NumPy
kernels at import time. Set SPOTKD_NO_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SPOTKD_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "spotkd._kernels._scan",
                    ["src/spotkd/_kernels/_scan.pyx"],
                    extra_compile_args=["-O3", "-march=native", "-funroll-loops",
                                        "-ffast-math"],
                    extra_link_args=["-lmvec", "-lm"],
                    optional=True,
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)

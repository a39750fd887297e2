"""Build script: compiles the optional Cython kernel core.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "scat2d._kernels._core",
                ["src/scat2d/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
        quiet=True,
    )
except Exception as exc:  # pragma: no cover
    sys.stderr.write(f"scat2d: skipping compiled kernels ({exc!r}); numpy fallback will be used\n")

setup(ext_modules=ext_modules)

"""Build script with an optional compiled kernel.

The package is fully functional without a C compiler: probeq._backend falls
back to the numpy implementation when probeq._kernels is absent.
"""
import os
from setuptools import setup

ext_modules = []
if os.environ.get("PROBEQ_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "probeq._kernels",
                    sources=["src/probeq/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)

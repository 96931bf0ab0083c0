"""Build the optional compiled kernels.

`pip install -e . --no-build-isolation` compiles ``xreg._ckernels``. If Cython
or a compiler is missing the package still installs and runs on the
pure-Python kernels.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("XREG_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "xreg._ckernels",
                    ["src/xreg/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)

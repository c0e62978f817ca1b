# Build with:  python setup.py build_ext --inplace
# The compiled kernels are optional; the package falls back to the pure-Python
# implementations in atclab._kernels.pure when the extension is absent.

from setuptools import setup, Extension

import numpy as np

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "atclab._kernels._speedups",
                ["src/atclab/_kernels/_speedups.pyx"],
                include_dirs=[np.get_include()],
                optional=True,
            )
        ],
        language_level="3",
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)

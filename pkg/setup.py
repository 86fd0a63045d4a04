"""Optional Cython build for the F_p elimination kernel.

If Cython or a compiler is missing the package still installs and falls back
to the numpy kernel at import time.
"""
from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("sixlab._kernels", ["src/sixlab/_kernels.pyx"],
                   include_dirs=[np.get_include()])],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)

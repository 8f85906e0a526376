"""Build the optional Cython kernels; the package also runs without them."""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("NOISYFB_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension(
                "noisyfb._kernels",
                ["src/noisyfb/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )],
            language_level=3,
        )

setup(ext_modules=ext_modules)

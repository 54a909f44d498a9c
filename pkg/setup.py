import os

import numpy as np
from setuptools import Extension, setup

# GEORAMSEY_NO_EXT=1 skips the compiled kernels; the package then runs on the
# numpy fallback.
ext_modules = []
if not os.environ.get("GEORAMSEY_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "georamsey._kernels",
                ["src/georamsey/_kernels.pyx"],
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

setup(ext_modules=ext_modules)

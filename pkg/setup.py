"""Build script for the optional compiled scan kernels.

Falls back to a pure-Python install when Cython, numpy headers or a C
compiler are missing; ``tablegru.kernels`` then selects the numpy loops.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "tablegru._scan_ext",
                ["src/tablegru/_scan_ext.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)

"""Build script: compiles the optional fast-kernel extension.

Set SHELLKOOP_NO_EXT=1 to skip the extension entirely; the package then
runs on the pure-NumPy kernel backend.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("SHELLKOOP_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "shellkoop.nncore._ckernels",
                    ["src/shellkoop/nncore/_ckernels.pyx"],
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

"""Build script for the optional compiled core.

The package is pure Python plus one Cython extension holding the two hot
kernels (event-driven simulation, clique/subset rate corrections). If the
extension cannot be built the install still succeeds and the pure-Python
fallbacks are used at import time.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: building the compiled core failed ({exc}); "
            "falling back to the pure-Python kernels.",
            file=sys.stderr,
        )


ext_modules = []
cmdclass = {}
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "csma_backoff._core",
                ["src/csma_backoff/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
    cmdclass["build_ext"] = optional_build_ext
except ImportError as exc:
    print(f"WARNING: {exc}; installing without the compiled core.", file=sys.stderr)

setup(ext_modules=ext_modules, cmdclass=cmdclass)

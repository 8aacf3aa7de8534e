import os
import sys

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Skip the compiled core when it cannot be built; the package then
    runs on its pure-Python fallback."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            self._warn(exc)

    def _warn(self, exc):
        sys.stderr.write(f"warning: compiled core not built ({exc}); using Python fallback\n")


extensions = []
if not os.environ.get("STOCHHEAT_NO_EXTENSION"):
    extensions = cythonize(
        [
            Extension(
                "stochheat._kernels",
                ["src/stochheat/_kernels.pyx"],
                include_dirs=[np.get_include()],
                libraries=["fftw3", "m"],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions, cmdclass={"build_ext": optional_build_ext})

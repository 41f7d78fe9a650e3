"""Build script for the optional compiled kernels.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so a missing compiler or Cython must not break
installation. Set DDSPECTRO_NO_EXT=1 to skip the extension build entirely.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible, warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, broken toolchain, ...
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        import warnings

        warnings.warn(
            f"could not build the compiled kernels ({exc!r}); "
            "falling back to the pure NumPy implementation"
        )


ext_modules = []
cmdclass = {}
if os.environ.get("DDSPECTRO_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "ddspectro._kernels._ckernels",
                    ["src/ddspectro/_kernels/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3", "-funroll-loops"],
                )
            ],
            language_level="3",
        )
        cmdclass = {"build_ext": optional_build_ext}
    except ImportError:
        pass

setup(ext_modules=ext_modules, cmdclass=cmdclass)

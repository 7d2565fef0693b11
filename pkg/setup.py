"""Build script: compiles the optional stencil kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so any compiler failure downgrades to a pure-Python install
instead of aborting.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


def _extensions():
    if os.environ.get("PEAKLAB_SKIP_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "peaklab._kernels._stencil_cy",
        sources=["src/peaklab/_kernels/_stencil_cy.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


class optional_build_ext(build_ext):
    """Swallow compiler errors; the import-time backend selection copes."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: extension build skipped ({exc}); using NumPy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: {ext.name} skipped ({exc}); using NumPy fallback")


setup(
    ext_modules=_extensions(),
    cmdclass={"build_ext": optional_build_ext},
)

"""Build script for the optional compiled edit-distance kernel.

The extension is a pure speedup: if Cython or a C compiler is missing the
install still succeeds and poplens falls back to the Python implementation
(see poplens/editdist.py).
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """build_ext that degrades to a warning instead of failing the install."""

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
        print(f"WARNING: compiled kernel not built ({exc}); "
              "poplens will use the pure-Python fallback")


try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [Extension("poplens._editdist", ["src/poplens/_editdist.pyx"])],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions, cmdclass={"build_ext": optional_build_ext})

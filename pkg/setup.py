"""Build script.

The package is pure Python except for one optional Cython extension,
memodel._order_search_c, which accelerates the global-order witness search
(the hot inner loop of the axiomatic engine).  If Cython or a C compiler is
unavailable the extension is skipped and the pure-Python implementation is
selected automatically at import time.
"""

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the speedup extension if possible, never fail the install."""

    def run(self):
        try:
            super().run()
        except Exception as e:  # missing compiler, etc.
            print(f"warning: skipping compiled order-search kernel ({e}); "
                  "the pure-Python fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as e:
            print(f"warning: could not build {ext.name} ({e}); "
                  "the pure-Python fallback will be used")


ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/memodel/_order_search_c.pyx"],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})

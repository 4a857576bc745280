"""Build script: compiles the optional Cython fast core.

The package is fully functional without the extension (a NumPy reference
backend is selected at import time); the build therefore tolerates a missing
compiler or Cython and falls back to a pure-Python install.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the fast core if possible, otherwise install without it."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: skipping compiled core ({exc}); "
                  "falling back to the NumPy backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: could not build {ext.name} ({exc}); "
                  "falling back to the NumPy backend")


def make_extensions():
    import os
    if not os.path.exists("src/lagflow/backends/_fastcore.pyx"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "lagflow.backends._fastcore",
        ["src/lagflow/backends/_fastcore.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=make_extensions(), cmdclass={"build_ext": OptionalBuildExt})

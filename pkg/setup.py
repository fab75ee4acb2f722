"""Build script: compiles the optional simulation kernel.

The package is fully functional without the extension (a pure-Python
fallback is selected at import time), so any failure to build the kernel
downgrades to a warning instead of aborting the install.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Skip the extension (with a warning) if the toolchain is missing."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure is non-fatal
            warnings.warn(f"simulation kernel not built ({exc}); "
                          "falling back to the pure-Python engine")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            warnings.warn(f"simulation kernel not built ({exc}); "
                          "falling back to the pure-Python engine")


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        warnings.warn(f"Cython/numpy unavailable ({exc}); "
                      "installing without the compiled kernel")
        return []
    ext = Extension(
        "moodnet.abm._simkernel",
        ["src/moodnet/abm/_simkernel.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})

"""Build the optional compiled kernels; the package runs without them."""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("FERMI_ACCEL_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "fermi_accel._kernels",
                    ["src/fermi_accel/_kernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)

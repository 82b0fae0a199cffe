from setuptools import Extension, setup
from Cython.Build import cythonize

ext_modules = cythonize(
    [
        Extension(
            "sgdinfer._kernels._chainloops",
            ["src/sgdinfer/_kernels/_chainloops.pyx"],
        )
    ],
    language_level=3,
)

setup(ext_modules=ext_modules)

"""Build hook for the optional compiled kernels.

The Cython extension is optional: if it fails to build, the package falls
back to the numpy implementations in ``beamgevrey._pykernels``.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "beamgevrey._ckernels",
                ["src/beamgevrey/_ckernels.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)

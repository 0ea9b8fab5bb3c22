import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("BLOCKMUT_SKIP_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "blockmut.sim._kernel",
                ["src/blockmut/sim/_kernel.pyx"],
                extra_compile_args=["-O3"],
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

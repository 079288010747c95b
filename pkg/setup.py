import numpy
from setuptools import Extension, setup

# The compiled transportation-simplex kernel is optional: the package falls
# back to the pure-python twin (kpg_ot._simplex_py) when the extension is
# absent, so a failed build still yields a working install.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "kpg_ot._simplex",
                ["src/kpg_ot/_simplex.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)

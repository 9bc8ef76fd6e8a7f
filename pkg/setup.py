import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# No -march=native / -ffast-math, and contraction is disabled explicitly:
# the pure-NumPy backend must stay bitwise-identical to the compiled one,
# and a fused multiply-add in the C code would break that.
COMPILE_ARGS = ["-O3", "-ffp-contract=off"]

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "picmc.backends._kernels",
                ["src/picmc/backends/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=COMPILE_ARGS,
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    # Pure-Python fallback still works without Cython; the compiled backend
    # is simply unavailable.
    ext_modules = []

setup(ext_modules=ext_modules)

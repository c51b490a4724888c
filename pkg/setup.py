import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension(
    "dinavd._kernels",
    ["src/dinavd/_kernels.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=["-O3", "-ffp-contract=off"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(ext_modules=cythonize([ext], language_level=3))

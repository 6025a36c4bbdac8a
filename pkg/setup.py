import numpy as np
from setuptools import Extension, setup

# The hit-and-run chain kernel is compiled when Cython and a C compiler are
# present; preflearn._core falls back to the pure-numpy reference kernel at
# import time otherwise, so the extension is marked optional.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "preflearn._core._hitrun",
                ["src/preflearn/_core/_hitrun.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
    for ext in ext_modules:
        ext.optional = True
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)

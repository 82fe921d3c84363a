import os

import numpy as np
from setuptools import setup
from setuptools.extension import Extension

ext_modules = []
if os.environ.get("MERLAB_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension("merlab._kernels", ["src/merlab/_kernels.pyx"],
                       include_dirs=[np.get_include()])],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)

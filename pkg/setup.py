from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    import numpy as np
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("ymloops._kernels", ["src/ymloops/_kernels.pyx"], include_dirs=[np.get_include()])],
        language_level=3,
    )
except ImportError:
    # no Cython at build time: the pure-Python kernels are used instead
    pass

setup(ext_modules=ext_modules)

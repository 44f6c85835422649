import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("FRPDISPATCH_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("frpdispatch._simplex_kernel", ["src/frpdispatch/_simplex_kernel.pyx"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)

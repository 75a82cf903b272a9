"""Build script: compiles the optional fast kernel extension.

The package is fully functional without the extension; the numpy fallback
in ``activebasis.kernels`` is selected automatically at import when the
compiled module is absent.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "activebasis.kernels._fastcore",
                sources=["src/activebasis/kernels/_fastcore.pyx"],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)

"""Build script for the optional compiled inf-convolution kernel.

The extension is marked optional: if Cython or a C compiler is missing the
install still succeeds and hjflow falls back to the pure-NumPy kernels.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "hjflow.kernels._infconv_cy",
                ["src/hjflow/kernels/_infconv_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)

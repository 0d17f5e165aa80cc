"""Builds the optional compiled WordPiece kernel.

    python setup.py build_ext --inplace

The package runs without it (a pure-Python fallback is selected at import);
installs without Cython simply skip the extension.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "phishlens._wordpiece",
        ["src/phishlens/_wordpiece.pyx"],
        extra_compile_args=["-O3"],
    )
]

setup(
    ext_modules=cythonize(
        extensions, compiler_directives={"language_level": "3"}
    )
    if cythonize is not None
    else [],
)

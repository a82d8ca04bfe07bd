import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "nbiotrl._mlpkern",
                ["src/nbiotrl/_mlpkern.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-march=native"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

# The package works without the extension: nbiotrl.mlp_backend falls back to
# the numpy implementation when nbiotrl._mlpkern is absent.
setup(ext_modules=extensions)

import sys

from setuptools import Extension, setup

# The compiled slot-loop kernel is optional: the package falls back to the
# pure-Python kernel (dlsched._kernel_py) when the extension is unavailable.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("dlsched._speedups", ["src/dlsched/_speedups.pyx"])],
        language_level="3",
    )
except ImportError:
    print("Cython not available; building without the compiled kernel", file=sys.stderr)
    ext_modules = []

setup(ext_modules=ext_modules)

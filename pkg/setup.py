# Builds the optional compiled QP kernels. The package works without them
# (a numpy fallback is selected at import); build in place with
#   python setup.py build_ext --inplace
from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "rollguard._kernels._qpcore",
                ["src/rollguard/_kernels/_qpcore.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(
    package_dir={"": "src"},
    ext_modules=ext_modules,
)

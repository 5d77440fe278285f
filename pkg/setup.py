import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "dto_sim._fused",
        ["src/dto_sim/_fused.pyx"],
        include_dirs=[np.get_include()],
        # the pure-Python twin must match bit for bit: no fast-math, no FMA contraction,
        # no sin/cos -> sincos fusion (glibc sincos can differ by an ulp)
        extra_compile_args=["-O2", "-ffp-contract=off", "-fno-builtin"],
        optional=True,
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))

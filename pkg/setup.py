from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off keeps the compiled kernel bit-identical to the pure
# Python fallback (no FMA fusion; both sides then perform the same IEEE ops).
extensions = [
    Extension(
        "shockbound._kernel",
        ["src/shockbound/_kernel.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        language="c",
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))

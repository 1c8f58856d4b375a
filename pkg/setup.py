"""Build hook for the optional compiled simplex kernels.

A failed compile is not fatal: the package then runs on the NumPy kernels.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            self.warn(f"compiled kernels skipped: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            self.warn(f"compiled kernels skipped: {exc}")


try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    try:
        ext_modules = cythonize(
            [Extension("laminar_persuasion._simplex_core", ["src/laminar_persuasion/_simplex_core.pyx"],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )
    except Exception as exc:  # noqa: BLE001
        print(f"warning: cythonize failed, using NumPy kernels: {exc}")
        ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})

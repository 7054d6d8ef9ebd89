"""Build script: compiles the optional SHA-256 Merkle kernel.

The extension links against OpenSSL's libcrypto. If Cython or a C toolchain
is unavailable the build falls back to the pure-Python kernel; the package
works either way (vanetrust.kernel selects the backend at import).
Set VANETRUST_NO_EXT=1 to skip the extension entirely.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # toolchain missing: install pure-Python
            print(f"warning: skipping compiled kernel ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: skipping {ext.name} ({exc})")


def extensions():
    if os.environ.get("VANETRUST_NO_EXT") == "1":
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    return cythonize(
        [
            Extension(
                "vanetrust._kernel",
                ["src/vanetrust/_kernel.pyx"],
                libraries=["crypto"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})

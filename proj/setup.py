import os

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

eigen = next(
    (
        p
        for p in (
            os.environ.get("EIGEN3_INCLUDE_DIR", ""),
            "/usr/include/eigen3",
            "/usr/local/include/eigen3",
        )
        if p and os.path.isdir(p)
    ),
    None,
)
if eigen is None:
    raise RuntimeError("Eigen3 headers not found; set EIGEN3_INCLUDE_DIR")

sources = ["bindings/py_module.cpp"] + sorted(
    os.path.join("src", f) for f in os.listdir("src") if f.endswith(".cpp")
)

ext = Pybind11Extension(
    "tailrisk_lab._core",
    sources,
    include_dirs=["include", "vendor", eigen],
    libraries=["crypto"],
    cxx_std=20,
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})

"""In-tree PEP 517 backend: setuptools, without executing setup.py.

setup.py in this project is a standalone setup/smoke-check helper script
(imported by the tests), not a setuptools configuration script, so the
build must not run it. Packaging metadata lives in pyproject.toml.
"""

from setuptools import build_meta as _build_meta
from setuptools.build_meta import *  # noqa: F401,F403


class _Backend(_build_meta._BuildMetaBackend):
    def run_setup(self, setup_script="setup.py"):
        # A non-existent path makes setuptools fall back to a bare setup() call.
        super().run_setup(setup_script="__pyproject_only__.py")


_BACKEND = _Backend()

get_requires_for_build_wheel = _BACKEND.get_requires_for_build_wheel
get_requires_for_build_sdist = _BACKEND.get_requires_for_build_sdist
prepare_metadata_for_build_wheel = _BACKEND.prepare_metadata_for_build_wheel
build_wheel = _BACKEND.build_wheel
build_sdist = _BACKEND.build_sdist
get_requires_for_build_editable = _BACKEND.get_requires_for_build_editable
prepare_metadata_for_build_editable = _BACKEND.prepare_metadata_for_build_editable
build_editable = _BACKEND.build_editable

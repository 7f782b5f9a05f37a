import pytest

from codazzi_lab.frames import compute_geometry
from codazzi_lab.geometry import catalog

_CACHE = {}


@pytest.fixture(scope="session")
def geometry():
    """Cached geometry for ``(catalog name, resolution, params...)``."""
    def get(name, resolution=32, **params):
        key = (name, resolution, tuple(sorted(params.items())))
        if key not in _CACHE:
            _CACHE[key] = compute_geometry(catalog(name, resolution=resolution, **params))
        return _CACHE[key]
    return get

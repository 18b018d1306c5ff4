import logging

import numpy as np
import pytest

from fundusnet.dataset import ManifestRecord, save_png, write_manifest
from tests.resources import solid_image


@pytest.fixture(autouse=True)
def package_logger():
    """Undo configure_logging() between tests so caplog sees package records."""
    yield
    logger = logging.getLogger("fundusnet")
    for handler in list(logger.handlers):
        if getattr(handler, "_fundusnet", False):
            logger.removeHandler(handler)
    logger.propagate = True
    logger.setLevel(logging.NOTSET)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture()
def image_dir(tmp_path):
    """Two solid 40x40 images and a manifest pointing at them."""
    save_png(tmp_path / "a.png", solid_image(40, 40, 90))
    save_png(tmp_path / "b.png", solid_image(40, 40, 160))
    write_manifest(
        tmp_path / "manifest.csv",
        [ManifestRecord("a.png", 0, 0, False), ManifestRecord("b.png", 1, 3, False)],
    )
    return tmp_path


@pytest.fixture()
def sqlite_db_path(tmp_path):
    return tmp_path / "runs.db"

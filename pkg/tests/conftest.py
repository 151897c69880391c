import socket
import sys
from pathlib import Path

import numpy as np
import pytest

from vocprep.imagecore import ImageBuffer, load

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS_DIR = FIXTURES / "corpus"
VOC_DIR = FIXTURES / "voc"

# oracles.py lives next to the tests and is imported by name
sys.path.insert(0, str(Path(__file__).parent))


NETWORK_BLOCKED = "network access blocked in tests"


@pytest.fixture(autouse=True, scope="session")
def no_network():
    """Fail loudly if anything tries to open a connection."""

    def refuse(*args, **kwargs):
        raise RuntimeError(NETWORK_BLOCKED)

    saved = socket.socket.connect, socket.create_connection
    socket.socket.connect, socket.create_connection = refuse, refuse
    yield
    socket.socket.connect, socket.create_connection = saved


def gray(rows) -> ImageBuffer:
    return ImageBuffer(np.array(rows, dtype=np.int64))


@pytest.fixture
def strip():
    """1x256 gradient, one pixel per level."""
    return ImageBuffer(np.arange(256).reshape(1, 256))


@pytest.fixture(scope="session")
def corpus():
    """The frozen 10-image quality corpus as {name: ImageBuffer}."""
    return {p.stem: load(p) for p in sorted(CORPUS_DIR.glob("*.pgm"))}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_gray(rng, h=16, w=16, lo=0, hi=256) -> ImageBuffer:
    return ImageBuffer(rng.integers(lo, hi, size=(h, w)))


def write_voc(root, items):
    """Write a tiny VOC-style dataset.

    ``items`` maps a stem to ``(pixels, objects)`` with objects given as
    ``[(class_name, (xmin, ymin, xmax, ymax)), ...]``. Returns the
    (annotations, images) directories.
    """
    from vocprep.synthetic import annotation_xml, write_corpus

    images, annotations = {}, {}
    for stem, (pixels, objects) in items.items():
        img = ImageBuffer(np.asarray(pixels))
        images[stem] = img
        annotations[stem] = annotation_xml(f"{stem}.jpg", img.width, img.height, objects)
    return write_corpus(root, images, annotations)


def mixed_items(seed, n=60, size=12):
    """Unbalanced multi-class items with spread-out luminance."""
    r = np.random.default_rng(seed)
    classes = ["bird", "car", "cat", "dog", "person"]
    weights = [0.05, 0.15, 0.2, 0.2, 0.4]
    items = {}
    for k in range(n):
        n_obj = int(r.integers(1, 4))
        names = r.choice(classes, size=n_obj, p=weights)
        objects = [(str(c), (0, 0, size, size)) for c in names]
        level = int(r.integers(0, 256))
        items[f"{k:04d}"] = (np.full((size, size), level), objects)
    return items


# verdict lines from the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

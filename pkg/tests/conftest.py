import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from motorway_enforce.mlsls import PropositionAtlas  # noqa: E402
from motorway_enforce.sequence import seq  # noqa: E402
from motorway_enforce.traffic import CarGeometry, DynamicBounds, snapshot  # noqa: E402

DATA = Path(__file__).resolve().parent.parent / "demos" / "data"


@pytest.fixture
def two_car_snapshot():
    return snapshot({"A": {"pos": 0, "spd": 4}, "B": {"pos": 25, "spd": 4}})


@pytest.fixture
def geom():
    return {"A": CarGeometry(4, 10), "B": CarGeometry(4, 10)}


@pytest.fixture
def bounds():
    return DynamicBounds(-10, 5, 13)


@pytest.fixture
def gap_atlas():
    return PropositionAtlas.from_texts({
        "P21": "somewhere(<re(A) ~ (free & l=21) ~ re(B)>)",
        "Pin": "somewhere(<re(A) ~ (free & l>15 & l<=21) ~ re(B)>)",
        "P15": "somewhere(<re(A) ~ (free & l=15) ~ re(B)>)",
    })


@pytest.fixture
def m_good():
    return seq(({"P21"}, "[0,0]"), (set(), "(0,5)"), ({"P15"}, "[5,7)"), alphabet={"P21", "P15"})


@pytest.fixture
def m_late():
    return seq(({"P21"}, "[0,0]"), (set(), "(0,5]"), ({"P15"}, "(5,7)"), alphabet={"P21", "P15"})

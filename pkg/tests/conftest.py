import json
import pathlib

import numpy as np
import pytest

from qchlab.catalog import make_family

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

# oracle fixture key -> (family name, parameters)
ORACLE_FAMILIES = {
    "space_form": ("space_form", {}),
    "product_1_1": ("product", {"k1": 1, "k2": 1}),
    "product_1_-1": ("product", {"k1": 1, "k2": -1}),
    "calabi": ("calabi", {}),
    "calabi_round": ("calabi", {"V": [0, 0, 1, 1], "sigma_curvature": 1}),
    "orthotoric": ("orthotoric", {}),
    "orthotoric_quartic": ("orthotoric", {"F": [1, 0, 1, 0, 1], "G": [-8, 0, 1]}),
    "kowalski": ("kowalski", {}),
}

# families with a closed-form complex structure
EXPLICIT = [
    ("space_form", {}),
    ("space_form", {"c0": -4}),
    ("product", {"k1": 1, "k2": 1}),
    ("product", {"k1": 1, "k2": -1}),
    ("product", {"k1": 1, "k2": 2}),
    ("calabi", {}),
    ("calabi", {"V": [1, 1, 1], "sigma_curvature": -0.5}),
    ("orthotoric", {}),
    ("orthotoric", {"F": [1, 0, 1, 0, 1], "G": [-8, 0, 1]}),
]
ALL_FAMILIES = EXPLICIT + [("kowalski", {})]


def family_id(item):
    name, params = item
    return name + ("" if not params else "-" + "-".join(f"{k}={v}" for k, v in sorted(params.items())))


@pytest.fixture(scope="session")
def oracle():
    return json.loads((FIXTURES / "oracle_values.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, n=4):
    A = rng.normal(size=(n, n))
    return A @ A.T + n * np.eye(n)


def random_sym(rng, n=4):
    A = rng.normal(size=(n, n))
    return A + A.T


def random_form(rng, n=4):
    A = rng.normal(size=(n, n))
    return A - A.T


def family(name, params=None):
    return make_family(name, params or {})

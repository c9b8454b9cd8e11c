"""Shared fixtures: the three example systems, raw and normalized."""

import pytest

from sceneryflow.numfield import QQ, golden_field, rational_field
from sceneryflow.ifs import IFS, Similarity, normalize_ifs


def make_strong_separation(raw=False):
    """{x/4, x/4 + 3/4} with uniform p: strong separation, trivial N0."""
    field = rational_field()
    maps = [
        Similarity(field.element(QQ(1, 4)), (field.element(0),)),
        Similarity(field.element(QQ(1, 4)), (field.element(QQ(3, 4)),)),
    ]
    system = IFS(field, 1, maps, [QQ(1, 2), QQ(1, 2)])
    return system if raw else normalize_ifs(system)


def make_dyadic(raw=False):
    """{x/2, x/2 + 1/2} with uniform p: open set condition, interval attractor."""
    field = rational_field()
    maps = [
        Similarity(field.element(QQ(1, 2)), (field.element(0),)),
        Similarity(field.element(QQ(1, 2)), (field.element(QQ(1, 2)),)),
    ]
    system = IFS(field, 1, maps, [QQ(1, 2), QQ(1, 2)])
    return system if raw else normalize_ifs(system)


def make_golden(raw=False):
    """{rho x, rho x + 1 - rho} with uniform p, rho^2 = 1 - rho: exact overlaps."""
    field = golden_field()
    rho = field.generator()
    one = field.one()
    maps = [
        Similarity(rho, (field.zero(),)),
        Similarity(rho, (one - rho,)),
    ]
    system = IFS(field, 1, maps, [QQ(1, 2), QQ(1, 2)])
    return system if raw else normalize_ifs(system)


@pytest.fixture(scope="session")
def strong_separation():
    return make_strong_separation()


@pytest.fixture(scope="session")
def dyadic():
    return make_dyadic()


@pytest.fixture(scope="session")
def golden_bc():
    return make_golden()


@pytest.fixture(scope="session")
def all_systems(strong_separation, dyadic, golden_bc):
    return {
        "strong_separation": strong_separation,
        "dyadic": dyadic,
        "golden_bc": golden_bc,
    }

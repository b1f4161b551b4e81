import numpy as np

from stratified import corpus as C
from stratified import expressions as ex


def test_corpora_are_reproducible():
    a = [c.config() for c in C.divergence_corpus()]
    b = [c.config() for c in C.divergence_corpus()]
    assert a == b


def test_corpus_sizes():
    assert len(C.divergence_corpus()) == 25
    assert len(C.green_corpus()) == 6
    assert len(C.picone_corpus()) == 12
    assert len(C.hardy_corpus()) == 10
    assert len(C.diaz_saa_corpus()) == 10


def test_divergence_corpus_degrees_and_groups():
    cases = C.divergence_corpus()
    assert {c.group for c in cases} == {"R3", "H1", "Engel"}
    for c in cases:
        for f in c.exprs["fields"]:
            poly = ex.to_polynomial(ex.parse_expression(f), len(c.lo))
            assert max(poly.weighted_degrees([1] * len(c.lo)), default=0) <= c.exprs["degree"]


def test_picone_v_is_positive():
    x = np.random.default_rng(0).uniform(-1, 1, (3, 500))
    for c in C.picone_corpus():
        v = ex.evaluate_at(ex.parse_expression(c.exprs["v"]), x)
        assert np.min(v) > 1.0
        C.nonlinearity(c)


def test_diaz_saa_profiles_positive():
    for c in C.diaz_saa_corpus():
        x = np.random.default_rng(c.seed).uniform(c.lo, c.hi, (500, 3)).T
        for u in C.diaz_saa_profiles(c):
            assert np.min(ex.evaluate_at(u, x)) > 0

import pytest

from app.core.exceptions import ExactSearchInfeasibleError, PreconditionError
from app.models.measure import GroundSpace, RandomVar, Subset
from app.models.structures import HypercubeSpec
from app.services.application_service import (
    check_relative_densities,
    hypercube_uniform,
    omega_is_uniform,
    uniform_partition,
    uniform_partition_growth,
)
from app.services.semiring_service import hypercube_insensitive, rectangles


# ----------------------------------------------------------------
# UNIFORM PARTITIONS
# ----------------------------------------------------------------
def test_uniform_partition_growth():
    F = uniform_partition_growth(0.5)

    assert F(0) == 1
    assert F(1) == 33


def test_omega_uniformity(base2, sign_values):
    sr = rectangles(base2)

    assert omega_is_uniform(sign_values, sr, 0.3).uniform
    verdict = omega_is_uniform(sign_values, sr, 0.2)
    assert not verdict.uniform
    assert verdict.worst_value == pytest.approx(0.25)
    assert verdict.witness is not None


@pytest.mark.slow
@pytest.mark.parametrize("eta", [0.5, 0.9])
def test_uniform_partition_on_random_matrices(eta, rng):
    sr = rectangles(GroundSpace.uniform(3))
    for _ in range(50):
        report = uniform_partition(RandomVar(rng.normal(size=9)), sr, 2.0, eta)

        assert report.passed
        assert report.nonuniform_mass <= eta + 1e-9
        # size_bound is None once the bound overflows
        if report.size_bound is not None:
            assert len(report.partition) <= report.size_bound
        assert report.total_uniform_mass + report.nonuniform_mass == pytest.approx(1.0)
        assert len(report.cells) == len(report.partition)
        assert all(sr.contains(cell) for cell in report.partition)


def test_uniform_partition_checks_eta(base2, sign_values):
    with pytest.raises(PreconditionError):
        uniform_partition(sign_values, rectangles(base2), 2.0, 1.5)


# ----------------------------------------------------------------
# HYPERCUBES
# ----------------------------------------------------------------
@pytest.fixture
def cube():
    return HypercubeSpec(alphabet=["a", "b", "c"], n=2)


def word_subset(spec, words):
    index = {word: i for i, word in enumerate(spec.words())}
    return Subset.from_indices([index[word] for word in words], len(index))


def test_hypercube_uniform(cube):
    D = word_subset(cube, ["aa", "ab", "ba", "cc"])

    report = hypercube_uniform(D, cube, 0.6)

    assert report.passed
    assert report.uniform_family_mass >= 1 - 0.36 - 1e-9
    assert all(check.passed for check in report.densities)


@pytest.mark.slow
def test_hypercube_uniform_on_random_sets(cube, rng):
    words = cube.words()
    for _ in range(20):
        D = word_subset(cube, [word for word in words if rng.random() < 0.5])

        report = hypercube_uniform(D, cube, 0.6)

        assert report.passed
        for check in report.densities:
            assert check.worst_gap <= 0.6 + 1e-9


def test_density_of_the_whole_cube(cube):
    D = word_subset(cube, ["aa", "bb"])
    check = check_relative_densities(D, hypercube_insensitive(cube), Subset.full(9), 0.5)

    assert check.density == pytest.approx(2 / 9)
    assert check.checked >= 1


def test_hypercube_caps():
    wide = HypercubeSpec(alphabet=["a", "b", "c", "d"], n=1)

    with pytest.raises(ExactSearchInfeasibleError):
        hypercube_uniform(Subset.empty(4), wide, 0.5)


def test_hypercube_needs_all_pairs():
    partial = HypercubeSpec(alphabet=["a", "b", "c"], n=1, pairs=[("a", "b")])

    with pytest.raises(PreconditionError):
        hypercube_uniform(Subset.empty(3), partial, 0.5)

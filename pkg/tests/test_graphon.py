import numpy as np
import pytest

from app.core.exceptions import ConfigError, PreconditionError
from app.models.growth import parse_growth
from app.models.measure import Partition
from app.models.structures import Graphon
from app.services.graphon_service import (
    graphon_strong_regularity,
    graphon_weak_regularity,
    step_graphon,
    weak_step_bound,
)
from app.services.uniformity_service import cut_norm_exact


# ----------------------------------------------------------------
# GRAPHONS
# ----------------------------------------------------------------
def test_asymmetric_matrix_is_rejected():
    with pytest.raises(PreconditionError):
        Graphon.from_matrix([[0.0, 1.0], [0.5, 0.0]])


def test_step_graphon_averages_blocks(sign_graphon_factory):
    W = sign_graphon_factory(4)
    R = Partition.from_labels([0, 0, 1, 1])

    stepped = step_graphon(W, R)

    block = W.matrix[:2, 2:].mean()
    assert stepped.matrix[0, 3] == pytest.approx(block)
    assert np.array_equal(stepped.matrix, stepped.matrix.T)
    # Averaging never increases the cut norm
    assert cut_norm_exact(stepped.W, W.base).value <= cut_norm_exact(W.W, W.base).value + 1e-12


# ----------------------------------------------------------------
# WEAK REGULARITY
# ----------------------------------------------------------------
def test_weak_regularity_on_the_sign_matrix(sign_graphon):
    # 1. Cut norm 1/4 beats eps = 0.2: one step to singletons
    result = graphon_weak_regularity(sign_graphon, 2.0, 0.2)
    assert result.passed
    assert result.steps == 1
    assert result.step_bound == 25
    assert result.final_cut_norm <= 0.2

    # 2. eps = 0.3 needs nothing
    assert graphon_weak_regularity(sign_graphon, 2.0, 0.3).steps == 0


def test_weak_regularity_of_a_constant():
    result = graphon_weak_regularity(Graphon.from_matrix(np.full((3, 3), 0.7)), 2.0, 0.1)

    assert result.steps == 0
    assert result.R == Partition.trivial(3)


@pytest.mark.slow
@pytest.mark.parametrize("p, bound", [(2.0, 4), (1.5, 8)])
def test_weak_regularity_on_random_graphons(p, bound, sign_graphon_factory, rng):
    assert weak_step_bound(p, 0.5) == bound
    for _ in range(100):
        W = sign_graphon_factory(int(rng.integers(2, 9)))
        result = graphon_weak_regularity(W, p, 0.5)

        assert result.passed
        assert result.steps <= bound
        assert result.final_cut_norm <= 0.5 + 1e-9
        assert all(step.growth_factor <= 4 for step in result.log)


# ----------------------------------------------------------------
# STRONG REGULARITY
# ----------------------------------------------------------------
def test_strong_regularity_on_the_sign_matrix(sign_graphon):
    result = graphon_strong_regularity(sign_graphon, 2.0, 0.5, parse_growth("cor45:h=recip"))

    assert result.passed
    assert result.R == Partition.singletons(2)
    assert result.err_lp == pytest.approx(0.0, abs=1e-12)
    assert result.cut_gap == pytest.approx(0.0, abs=1e-12)
    assert result.unf_bound == pytest.approx(1 / 125)


def test_strong_regularity_on_random_graphons(sign_graphon_factory):
    for _ in range(3):
        W = sign_graphon_factory(4)
        result = graphon_strong_regularity(W, 2.0, 0.5, parse_growth("cor45:h=const:4"), compute_bound=False)

        assert result.passed
        assert result.unf_sigma_norm <= result.unf_cut_norm + 1e-12
        assert result.Z.refines(result.R)


def test_strong_regularity_needs_a_schedule(sign_graphon):
    with pytest.raises(ConfigError):
        graphon_strong_regularity(sign_graphon, 2.0, 0.5, parse_growth("succ"))

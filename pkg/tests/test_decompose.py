import numpy as np
import pytest

from app.core.exceptions import NotAMemberError, PreconditionError
from app.models.growth import parse_growth
from app.models.measure import GroundSpace, Partition, RandomVar
from app.services.decompose_service import (
    decompose,
    decompose_multi,
    effective_exponent,
    greedy_simple_approximation,
    normalise,
    refine_step,
)
from app.services.measure_service import lp_norm
from app.services.semiring_service import from_name, rectangles
from app.services.uniformity_service import uniformity_norm


# ----------------------------------------------------------------
# TEST 1: THE SIGN MATRIX NEEDS NO REFINEMENT
# ----------------------------------------------------------------
def test_sign_matrix_over_rectangles(base2, sign_values):
    # 1. Cut norm 1/4 never beats 1/F(1) = 1/2
    result = decompose(sign_values, rectangles(base2), 2.0, 0.25, parse_growth("succ"))

    # 2. Everything lands in f_unf
    assert result.P == Partition.trivial(4)
    assert result.Q == Partition.trivial(4)
    assert result.f_unf.allclose(sign_values, atol=1e-12)

    # 3. Certificates
    certificates = result.certificates
    assert certificates.passed
    assert certificates.exact
    assert certificates.refinement_steps == 0
    assert certificates.unf_norms[0].measured == pytest.approx(0.25)
    assert certificates.unf_norms[0].bound == pytest.approx(0.5)


# ----------------------------------------------------------------
# TEST 2: RANDOM INSTANCES
# ----------------------------------------------------------------
@pytest.mark.slow
@pytest.mark.parametrize("p, sigma", [(2.0, 0.25), (1.5, 0.5)])
def test_random_decompositions_certify(p, sigma, rng):
    F = parse_growth("succ")
    for _ in range(100):
        n = int(rng.integers(2, 7))
        base = GroundSpace.uniform(n)
        sr = rectangles(base)
        f = RandomVar(rng.uniform(-1.0, 1.0, size=n * n))
        result = decompose(f, sr, p, sigma, F)

        # 1. The three parts add back to f; |f| < 1 needs no rescaling
        assert (result.f_str + result.f_err + result.f_unf).allclose(f, atol=1e-9)
        assert result.certificates.scale == 1.0
        assert result.certificates.passed
        # 2. Exact recomputation of both certificates
        assert lp_norm(result.f_err, sr.space, p) <= sigma + 1e-9
        assert uniformity_norm(result.f_unf, sr).value <= float(1 / F(len(result.P))) + 1e-9
        # 3. P is coarser than Q and every cell is a member
        assert result.Q.refines(result.P)
        assert all(sr.contains(cell) for cell in result.Q)
        # 4. A refinement multiplies the cell count by at most k + 1
        for step in result.certificates.steps:
            if step.kind == "refine":
                assert step.cells_after <= (sr.k + 1) * step.cells_before


def test_decompose_survives_an_overflowing_bound(base2, rng):
    # Reg' for k = 2, sigma = 1/4 is far beyond any digit limit
    f = RandomVar(rng.uniform(-1.0, 1.0, size=4))

    result = decompose(f, rectangles(base2), 2.0, 0.25, parse_growth("succ"))

    assert result.certificates.passed
    assert result.certificates.reg_prime is None
    assert result.certificates.within_reg_prime is None


def test_norm_just_above_one_with_sigma_one(base2):
    # 1. ||f||_2 = 1 + 5e-10 sits inside the tolerance but is still rescaled
    c = 1 + 5e-10
    f = RandomVar([c, c, -c, -c])
    sr = rectangles(base2)
    F = parse_growth("affine:3,1")

    result = decompose(f, sr, 2.0, 1.0, F)

    # 2. One split into the two rows, no energy jump
    assert result.certificates.passed
    assert result.certificates.scale == pytest.approx(c)
    assert result.certificates.scale > 1.0
    assert result.certificates.outer_iterations == 0
    assert result.Q.to_index_lists() == [[0, 1], [2, 3]]

    # 3. The family version accepts the same input
    family = decompose_multi([f], [sr], 2.0, 1.0, F)
    assert family.passed
    assert family.stage == 0


# ----------------------------------------------------------------
# TEST 3: SINGLE REFINEMENT STEPS
# ----------------------------------------------------------------
def test_refine_step(base2, sign_values):
    sr = rectangles(base2)
    trivial = Partition.trivial(4)

    refined = refine_step(sign_values, trivial, sr, 0.2, 2.0)
    assert refined is not None
    assert 1 < len(refined) <= 3
    assert refined.refines(trivial)

    assert refine_step(sign_values, trivial, sr, 0.3, 2.0) is None
    with pytest.raises(PreconditionError):
        refine_step(sign_values, trivial, sr, 0.0, 2.0)


def test_refine_step_rejects_non_member_cells(base2, sign_values):
    diagonal = Partition.from_index_lists([[0, 3], [1, 2]], 4)

    with pytest.raises(NotAMemberError):
        refine_step(sign_values, diagonal, rectangles(base2), 0.1, 2.0)


# ----------------------------------------------------------------
# TEST 4: INPUT NORMALISATION
# ----------------------------------------------------------------
def test_normalise(square2, sign_values):
    same, scale = normalise(sign_values, square2, 2.0)
    assert scale == 1.0
    assert same is sign_values

    halved, scale = normalise(sign_values * 2.0, square2, 2.0)
    assert scale == pytest.approx(2.0)
    assert halved.allclose(sign_values, atol=1e-12)

    with pytest.raises(PreconditionError):
        normalise(sign_values * 2.0, square2, 2.0, strict=True)

    # Rounding above 1 is rescaled even in strict mode
    nudged, scale = normalise(sign_values * (1 + 5e-10), square2, 2.0, strict=True)
    assert scale > 1.0
    assert lp_norm(nudged, square2, 2.0) <= 1.0 + 1e-15


def test_effective_exponent():
    assert effective_exponent(3.0) == 2.0
    assert effective_exponent(1.5) == 1.5
    with pytest.raises(PreconditionError):
        effective_exponent(1.0)


def test_decompose_rescales_large_inputs(base2, sign_values):
    result = decompose(sign_values * 4.0, rectangles(base2), 2.0, 0.25, parse_growth("succ"))

    assert result.certificates.scale == pytest.approx(4.0)
    assert result.certificates.passed
    assert result.f_unf.allclose(sign_values * 4.0, atol=1e-12)


# ----------------------------------------------------------------
# TEST 5: FAMILIES OVER AN INCREASING SEQUENCE
# ----------------------------------------------------------------
def test_decompose_multi(base3, rng):
    semirings = [from_name(name, base3) for name in ("rows", "rectangles", "power")]
    family = [RandomVar(rng.normal(size=9)) for _ in range(2)]

    result = decompose_multi(family, semirings, 2.0, 0.5, parse_growth("succ"))

    assert result.passed
    assert result.size_within_bound
    assert len(result.parts) == 2
    for part, f in zip(result.parts, family):
        assert part.P == result.P
        assert part.Q == result.Q
        assert (part.f_str + part.f_err + part.f_unf).allclose(f, atol=1e-9)
        indices = [entry.index for entry in part.certificates.unf_norms]
        assert indices == sorted(indices)
        assert indices[0] == 0


def test_decompose_multi_needs_an_increasing_sequence(base3, rng):
    semirings = [from_name("power", base3), from_name("rows", base3)]

    with pytest.raises(PreconditionError):
        decompose_multi([RandomVar(rng.normal(size=9))], semirings, 2.0, 0.5, parse_growth("succ"))
    with pytest.raises(PreconditionError):
        decompose_multi([], semirings[:1], 2.0, 0.5, parse_growth("succ"))


def test_family_threshold_is_fixed_within_a_stage(base2):
    # Within a stage the family loop refines against 1/H(n_j) = 1/F^(2)(0) = 1/4,
    # while the single-function loop tightens to 1/F(|Q|) after every split.
    f = RandomVar([1.3, -0.1, -1.3, 0.1])
    sr = rectangles(base2)
    F = parse_growth("affine:3,1")

    # 1. Both split off the corner first (witness 0.325 > 1/4)
    single = decompose(f, sr, 2.0, 1.0, F)
    family = decompose_multi([f], [sr, sr], 2.0, 1.0, F)

    # 2. The corner residual 0.175 beats 1/F(3) = 1/10 but not 1/4
    assert len(single.Q) == 4
    assert len(family.Q) == 3
    assert single.Q.refines(family.Q)
    assert single.P == family.P == Partition.trivial(4)

    # 3. Both certify their own guarantees
    assert single.certificates.passed
    assert family.passed
    assert family.parts[0].certificates.unf_norms[-1].measured == pytest.approx(0.175)


# ----------------------------------------------------------------
# TEST 6: GREEDY SIMPLE-FUNCTION APPROXIMATION
# ----------------------------------------------------------------
def test_greedy_approximation(rng):
    space = GroundSpace(tuple(range(6)), rng.dirichlet(np.ones(6)))
    f = RandomVar(rng.normal(size=6))

    result = greedy_simple_approximation(f, space, 0.3, 2.0)

    assert result.passed
    assert result.l1_error <= 0.3
    assert result.iterations <= result.iteration_bound

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fibersim.correlation import (PPTVerdict, Unsupported, cut, discord, get_functional, is_separable_ppt,
                                  log_negativity, mutual_information, negativity, qubit_cut, ree_estimate,
                                  ree_lower_bound, relative_entropy, von_neumann_entropy)
from fibersim.sampling import random_density, random_local_unitary, random_product_pure, random_separable
from fibersim.states import bell_state, maximally_mixed, werner_state

B2 = qubit_cut()
LN2 = math.log(2)
BELL = bell_state("phi+").matrix
CLASSICAL = np.diag([0.5, 0, 0, 0.5]).astype(complex)

# closed forms evaluated with mpmath (30 digits)
WERNER_08 = {"ree": 0.270438092753954437903399756046, "discord": 0.430729222845186223700662998732,
             "mi": 0.798793430013683293611345091966, "neg": 0.35}
WERNER_05 = {"ree": 0.031583942401963249564227304196, "discord": 0.181939478770230465579040655575,
             "mi": 0.312751514711367424708242461808, "neg": 0.125}


def test_entropy_examples():
    assert von_neumann_entropy(np.diag([1.0, 0])) == 0
    assert abs(von_neumann_entropy(np.eye(2) / 2) - LN2) <= 1e-15
    assert abs(von_neumann_entropy(np.eye(4) / 4) - 2 * LN2) <= 1e-15


def test_relative_entropy_examples(rng):
    rho = random_density(3, rng).matrix
    assert abs(relative_entropy(rho, rho)) <= 1e-12
    P0 = np.diag([1.0, 0])
    assert abs(relative_entropy(P0, np.eye(2) / 2) - LN2) <= 1e-15
    assert relative_entropy(P0, np.diag([0.0, 1])) == math.inf
    assert abs(relative_entropy(P0, np.diag([0.75, 0.25])) - 0.287682072451780927439219005994) <= 1e-15


def test_negativity_examples(rng):
    assert negativity(random_product_pure((2, 2), rng), B2) <= 1e-15
    assert abs(negativity(BELL, B2) - 0.5) <= 1e-12
    assert abs(log_negativity(BELL, B2) - LN2) <= 1e-12
    assert negativity(werner_state(1 / 3), B2) <= 1e-9
    assert abs(negativity(werner_state(0.8), B2) - WERNER_08["neg"]) <= 1e-12


def test_ppt_examples(rng):
    assert is_separable_ppt(random_product_pure((2, 2), rng), B2) == PPTVerdict.SEPARABLE
    r = is_separable_ppt(BELL, B2)
    assert r == PPTVerdict.ENTANGLED and abs(r.min_pt_eig + 0.5) <= 1e-12
    assert is_separable_ppt(np.eye(9) / 9, cut((3, 3))) == PPTVerdict.INCONCLUSIVE


def test_mutual_information_examples(rng):
    assert mutual_information(random_product_pure((2, 2), rng), B2) <= 1e-12
    assert abs(mutual_information(BELL, B2) - 2 * LN2) <= 1e-12
    assert abs(mutual_information(CLASSICAL, B2) - LN2) <= 1e-12
    assert abs(mutual_information(werner_state(0.8), B2) - WERNER_08["mi"]) <= 1e-12


def test_ree_examples(rng):
    assert ree_estimate(random_separable((2, 2), rng), B2).value <= 1e-3
    assert ree_estimate(maximally_mixed(4), B2).value <= 1e-3
    r = ree_estimate(BELL, B2)
    assert LN2 - 1e-9 <= r.value <= LN2 + 5e-3 and r.exactness == "upper_bound"
    for p, ref in ((0.8, WERNER_08), (0.5, WERNER_05)):
        v = ree_estimate(werner_state(p), B2).value
        assert ref["ree"] - 1e-9 <= v <= ref["ree"] + 5e-3


def test_ree_bell_against_isotropic_grid():
    # oracle: isotropic separable states sigma_F (F <= 1/2) give S(phi+ || sigma_F) = -log F
    grid = np.linspace(0.01, 0.5, 50)
    best = min(-math.log(F) for F in grid)
    assert abs(ree_estimate(BELL, B2).value - best) <= 5e-3


def test_discord_examples(rng):
    assert discord(random_product_pure((2, 2), rng), B2) <= 1e-9
    assert discord(CLASSICAL, B2) <= 1e-6
    assert abs(discord(BELL, B2) - LN2) <= 1e-3
    for p, ref in ((0.8, WERNER_08), (0.5, WERNER_05)):
        assert abs(discord(werner_state(p), B2) - ref["discord"]) <= 1e-6
    with pytest.raises(Unsupported):
        discord(np.eye(9) / 9, cut((3, 3)))


SHAPES = [((2, 2), (0,)), ((2, 3), (1,)), ((2, 2, 2), (0, 1))]
CHEAP = ["negativity", "log_negativity", "mutual_information", "discord"]


@settings(max_examples=10)
@given(st.sampled_from(SHAPES), st.integers(0, 10_000))
def test_functionals_nonnegative(shape, seed):
    r = np.random.default_rng(seed)
    B = cut(*shape)
    for k in range(100):
        rho = random_density(B.total, r).matrix
        for name in CHEAP:
            if name == "discord" and k % 10:
                continue
            assert get_functional(name)(rho, B) >= -1e-9


@given(st.sampled_from(SHAPES), st.integers(0, 10_000))
def test_local_unitary_invariance(shape, seed):
    r = np.random.default_rng(seed)
    B = cut(*shape)
    rho = random_density(B.total, r).matrix
    U = random_local_unitary(B.dims, r)
    rho2 = U @ rho @ U.conj().T
    for name in CHEAP:
        f = get_functional(name)
        assert abs(f(rho2, B) - f(rho, B)) <= 1e-8


@given(st.sampled_from(SHAPES[:2]), st.integers(0, 10_000), st.booleans())
def test_negativity_zero_iff_not_entangled(shape, seed, separable):
    r = np.random.default_rng(seed)
    B = cut(*shape)
    rho = random_separable(B.dims, r).matrix if separable else random_density(B.total, r).matrix
    n = negativity(rho, B)
    v = is_separable_ppt(rho, B)
    assert (n == 0) == (v != PPTVerdict.ENTANGLED)


@settings(max_examples=6)
@given(st.integers(0, 10_000))
def test_ree_upper_bound_consistent(seed):
    rho = random_density(4, np.random.default_rng(seed)).matrix
    assert ree_estimate(rho, B2, n_starts=1).value >= ree_lower_bound(rho, B2) - 1e-9


@given(st.integers(0, 10_000))
def test_discord_of_products_vanishes(seed):
    r = np.random.default_rng(seed)
    rho = np.kron(random_density(2, r).matrix, random_density(2, r).matrix)
    assert discord(rho, B2) <= 1e-6

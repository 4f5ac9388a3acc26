import math

import numpy as np
import pytest

from mabermudan.bench import evaluate_policy
from mabermudan.engine_gprghq import GprGhqConfig, price as price_gprghq
from mabermudan.engine_ls import (LsConfig, least_squares, monomials, n_basis, price_ls,
                                  simulate_paths)
from mabermudan.errors import DomainError
from mabermudan.models import BlackScholesParams, ClewlowStricklandParams, RoughBergomiParams
from mabermudan.results import pair_means
from mabermudan.state import OptionSpec, full_a_from_spots, payoff_batch

BS = BlackScholesParams()


def test_monomial_basis():
    Z = np.array([[2.0, 3.0], [1.0, -1.0]])
    got = monomials(Z, 2)
    np.testing.assert_array_equal(got, [[1, 2, 3, 4, 6, 9], [1, 1, -1, 1, -1, 1]])
    for d in range(1, 5):
        for deg in (1, 2, 3):
            assert monomials(np.ones((1, d)), deg).shape[1] == n_basis(d, deg)


def test_least_squares_and_ridge_fallback():
    rng = np.random.default_rng(0)
    X = np.column_stack([np.ones(50), rng.normal(size=50)])
    y = 1.5 - 2.0 * X[:, 1]
    np.testing.assert_allclose(least_squares(X, y), [1.5, -2.0], rtol=1e-12)
    dup = np.column_stack([X, X[:, 1]])
    with pytest.warns(RuntimeWarning):
        beta = least_squares(dup, y)
    np.testing.assert_allclose(dup @ beta, y, atol=1e-6)


@pytest.mark.parametrize("model", [BS, ClewlowStricklandParams.flat(100.0)], ids=["bs", "cs"])
def test_single_date_is_european_for_any_degree(model):
    option = OptionSpec(0.2, 5, 5)
    a = price_ls(option, model, LsConfig(n_paths=20_000, degree=1))
    b = price_ls(option, model, LsConfig(n_paths=20_000, degree=3))
    assert a.price == b.price
    paths = simulate_paths(option, model, 20_000, 0)
    pay = payoff_batch(full_a_from_spots(paths.spots, 5, 5, 5)) * math.exp(-model.rate * 0.2)
    assert a.price == pytest.approx(pay.mean(), rel=1e-13)


def test_antithetic_variance_reduction():
    option = OptionSpec(0.2, 5, 5)
    res = price_ls(option, BS, LsConfig(n_paths=100_000))
    paths = simulate_paths(option, BS, 100_000, 0)
    pay = payoff_batch(full_a_from_spots(paths.spots, 5, 5, 5))
    plain_var = pay.var(ddof=1) / pay.size
    anti_var = pair_means(pay).var(ddof=1) / (pay.size // 2)
    assert anti_var / plain_var < 0.75
    indep = price_ls(option, BS, LsConfig(n_paths=100_000, antithetic=False))
    assert res.ci_radius < indep.ci_radius


def test_window_three_value():
    res = price_ls(OptionSpec(0.2, 50, 3), BS, LsConfig(n_paths=100_000))
    assert abs(res.price - 2.69) <= 0.01


def test_close_to_forward_benchmark():
    option = OptionSpec(0.2, 50, 2)
    ls = price_ls(option, BS, LsConfig(n_paths=100_000))
    policy = price_gprghq(option, BS, GprGhqConfig(quad_order=64, mc_final_paths=2_000))
    fwd = evaluate_policy(policy.surrogate, option, BS, 400_000, seed=17)
    assert abs(ls.price - fwd.price) <= 2 * math.hypot(ls.ci_radius, fwd.ci_radius)


def test_determinism_and_threads():
    option = OptionSpec(0.2, 20, 3)
    a = price_ls(option, BS, LsConfig(n_paths=150_000))
    b = price_ls(option, BS, LsConfig(n_paths=150_000, threads=3))
    assert a.price == b.price and a.ci_radius == b.ci_radius
    c = price_ls(option, BS, LsConfig(n_paths=150_000, seed=1))
    assert c.price != a.price


def test_rough_bergomi_runs_with_features():
    option = OptionSpec(0.2, 8, 2)
    res = price_ls(option, RoughBergomiParams(), LsConfig(n_paths=4_000, rb_memory=2))
    sur = res.surrogate
    assert sur.needs_features and res.price > 0
    # two features (h = n, n+1, n+2 capped at N) plus one average component
    assert sur.steps[5].center.shape == (4,)


def test_guards():
    with pytest.raises(DomainError):
        LsConfig(degree=0)
    with pytest.raises(DomainError):
        LsConfig(n_paths=1001)
    with pytest.raises(DomainError):
        price_ls(OptionSpec(0.2, 50, 5), BS, LsConfig(n_paths=100, degree=2))

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddkelly.errors import ConstraintViolationError, InvalidInputError
from ddkelly.market import MarketModel, SimBatch, gbm_preset, simulate_batch
from ddkelly.paths import SampledPath, TimeGrid, relative_drawdown, running_max
from ddkelly.transform import (
    az_forward, az_inverse, constrained_wealth_direct, constrained_wealth_paths, kelly_fraction,
    verify_drawdown,
)

paths = st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=60).map(lambda v: np.array([1.0] + v))
alphas = st.floats(0.0, 0.95)


def test_forward_examples():
    x = np.array([1.0, 2.0, 1.5])
    assert np.array_equal(az_forward(x, 0.0), x)
    assert np.allclose(az_forward(x, 0.5), [1, 1.4142136, 1.2374369], atol=5e-8)
    assert np.all(az_forward(np.ones(5), 0.7) == 1.0)


def test_forward_hand_oracle():
    # 0.5 * sqrt(2) + 0.5 * 1.5 / sqrt(2)
    assert az_forward(np.array([1.0, 2.0, 1.5]), 0.5)[2] == pytest.approx(
        0.5 * math.sqrt(2) + 0.75 / math.sqrt(2), rel=1e-15)


def test_forward_preserves_sampled_path():
    p = SampledPath.from_values([1.0, 2.0, 1.5], dt=0.25)
    out = az_forward(p, 0.5)
    assert isinstance(out, SampledPath) and out.grid == p.grid


def test_forward_requires_unit_start_and_valid_alpha():
    with pytest.raises(InvalidInputError):
        az_forward(np.array([2.0, 1.0]), 0.5)
    for bad in (-0.1, 1.0):
        with pytest.raises(InvalidInputError):
            az_forward(np.array([1.0, 1.0]), bad)


def test_forward_of_bankrupt_path_stays_positive():
    out = az_forward(np.array([1.0, 2.0, 0.0, 0.0]), 0.5)
    assert out[2] == pytest.approx(0.5 * math.sqrt(2))


def test_inverse_examples():
    assert np.array_equal(az_inverse(np.array([1.0, 1.3, 0.9]), 0.0), [1.0, 1.3, 0.9])
    chi = az_forward(np.array([1.0, 2.0, 1.5]), 0.5)
    assert np.allclose(az_inverse(chi, 0.5), [1, 2, 1.5], rtol=1e-14)
    with pytest.raises(ConstraintViolationError) as exc:
        az_inverse(np.array([1.0, 0.4]), 0.5)
    assert exc.value.first_index == 1


def test_inverse_at_the_floor_is_bankruptcy():
    assert az_inverse(np.array([1.0, 2.0, 1.0]), 0.5)[2] == 0.0


def test_kelly_fraction_examples():
    assert kelly_fraction(1.0, 0.3) == pytest.approx(0.7)
    assert kelly_fraction(0.0, 0.3) == 0.0
    assert kelly_fraction(0.75, 0.5) == pytest.approx(0.375 / 0.875, rel=1e-15)
    with pytest.raises(InvalidInputError):
        kelly_fraction(1.2, 0.5)


@settings(max_examples=200)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.99))
def test_kelly_fraction_bounded_and_increasing(r1, r2, a):
    lo, hi = sorted((r1, r2))
    f_lo, f_hi = kelly_fraction(lo, a), kelly_fraction(hi, a)
    assert 0 <= f_lo <= f_hi <= 1 - a + 1e-15


def test_verify_examples():
    assert verify_drawdown(np.array([1.0, 0.4]), 0.5).violations == [1]
    assert verify_drawdown(np.array([1.0, 2.0, 1.0]), 0.5, tol=0.0).ok


@settings(max_examples=300)
@given(paths, alphas)
def test_drawdown_identity(x, a):
    lhs = relative_drawdown(az_forward(x, a))
    assert np.max(np.abs(lhs - (a + (1 - a) * relative_drawdown(x)))) < 1e-12


@settings(max_examples=300)
@given(paths, alphas)
def test_forward_satisfies_constraint_exactly(x, a):
    assert verify_drawdown(az_forward(x, a), a, tol=0.0).ok


@settings(max_examples=300)
@given(paths, alphas)
def test_running_max_intertwining(x, a):
    lhs = running_max(az_forward(x, a))
    assert np.allclose(lhs, running_max(x) ** (1 - a), rtol=1e-14, atol=0)


@settings(max_examples=300)
@given(paths, alphas)
def test_times_of_maximum_coincide(x, a):
    ax = az_forward(x, a)
    assert np.array_equal(x == running_max(x), ax == running_max(ax))


shallow_paths = st.lists(st.floats(1e-2, 1e2), min_size=1, max_size=60).map(
    lambda v: np.array([1.0] + v))


@settings(max_examples=300)
@given(shallow_paths, st.floats(0.0, 0.9))
def test_round_trip(x, a):
    assert np.max(np.abs(az_inverse(az_forward(x, a), a) - x) / x) < 1e-10


@settings(max_examples=300)
@given(paths, st.floats(0.0, 0.9))
def test_round_trip_conditioning(x, a):
    # subtracting the floor cancels digits when x / max(x) is tiny
    r = relative_drawdown(x)
    bound = 64 * np.finfo(float).eps * (1 + a / ((1 - a) * r))
    assert np.all(np.abs(az_inverse(az_forward(x, a), a) - x) / x <= bound)


@settings(max_examples=300)
@given(paths, st.floats(0.0, 0.9), st.floats(0.0, 0.9))
def test_composition(x, a, b):
    g = 1 - (1 - a) * (1 - b)
    rhs = az_forward(x, g)
    assert np.max(np.abs(az_forward(az_forward(x, a), b) - rhs) / rhs) < 1e-10


@settings(max_examples=100)
@given(paths, st.floats(0.05, 0.9))
def test_value_at_maxima_decreasing_in_alpha(x, a):
    at = x == running_max(x)
    big = at & (x > 1)
    assert np.all(az_forward(x, a)[big] < az_forward(x, a / 2)[big])


def test_direct_alpha_zero_is_base_wealth():
    b = simulate_batch(gbm_preset(), TimeGrid(0.01, 300), 5, 1)
    assert np.array_equal(constrained_wealth_direct(b, 2, 5.0, 0.0).values, b.numeraire.wealth[2])


def test_direct_degenerate_market_is_constant():
    m = MarketModel.constant_coefficients([0.0], [[0.0]])
    b = simulate_batch(m, TimeGrid(0.01, 100), 2, 1)
    assert np.all(constrained_wealth_direct(b, 0, 1.0, 0.5).values == 1.0)


def _coarsen(batch, factor):
    grid = TimeGrid(batch.grid.dt * factor, batch.grid.n_steps // factor)
    return SimBatch(batch.model, grid, batch.seed, batch.path_ids,
                    batch.prices[:, ::factor], batch.increments[:, :0])


def test_direct_trading_rule_converges_to_transform():
    # one fine simulation, read at four resolutions
    model = gbm_preset()
    fine = simulate_batch(model, TimeGrid(0.01 / 64, 64 * 100), 200, 1)
    errs = []
    for f in (64, 16, 4, 1):
        b = _coarsen(fine, f)
        direct = constrained_wealth_paths(b, model.kelly_proportions, 0.5)
        exact = az_forward(b.numeraire.wealth, 0.5)
        errs.append(float(np.mean(np.max(np.abs(direct - exact) / exact, axis=1))))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    # the running maximum moves inside a step, which limits the rule to order 1/2
    assert all(1.6 < r < 2.5 for r in ratios), (errs, ratios)
    assert errs[-1] < 0.005

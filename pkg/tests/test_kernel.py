import numpy as np
import pytest

from sociallearn import kernel
from sociallearn.config import CostModel, ScenarioConfig
from sociallearn.equilibrium import solve
from sociallearn.netform import Constant, FullHistory, Policy, SqrtGrowth, ZeroPrefix
from sociallearn.oracle import brute_force_oracle
from sociallearn.signals import BoundedLinear, LinearUnbounded

needs_compiled = pytest.mark.skipif(not kernel.compiled_available(), reason="compiled kernel not built")

SCENARIOS = {
    "line": ScenarioConfig(cost=CostModel.flat(0.1), N=60),
    "firstk_sqrt": ScenarioConfig(cost=CostModel.flat(0.1), capacity=SqrtGrowth(), policy=Policy.FIRST_K, N=60),
    "chain": ScenarioConfig(cost=CostModel.flat(0.1), diffusion=True, N=60),
    "full_bounded": ScenarioConfig(structure=BoundedLinear(0.5), cost=CostModel.flat(0.0),
                                   capacity=FullHistory(), policy=Policy.FIRST_K, N=40),
    "stochastic": ScenarioConfig(structure=BoundedLinear(0.8), cost=CostModel.flat(0.05),
                                 capacity=ZeroPrefix(4, SqrtGrowth()), policy=Policy.FIRST_K,
                                 epsilon=0.2, M=4, N=40),
}


@pytest.fixture(scope="module", params=sorted(SCENARIOS))
def packed(request):
    cfg = SCENARIOS[request.param]
    return kernel.pack(solve(cfg), 0.5)


def test_uniforms_open_interval_and_keyed():
    u = kernel.block_uniforms(3, 0, 500, 20)
    assert u.shape == (500, 41)
    assert u.min() > 0.0 and u.max() < 1.0
    np.testing.assert_array_equal(u, kernel.block_uniforms(3, 0, 500, 20))
    assert not np.array_equal(u, kernel.block_uniforms(3, 1, 500, 20))
    assert not np.array_equal(u, kernel.block_uniforms(4, 0, 500, 20))


@needs_compiled
def test_backends_bit_identical(packed):
    a = kernel.run_counts(packed, 5000, seed=7, backend="python")
    b = kernel.run_counts(packed, 5000, seed=7, backend="cython")
    np.testing.assert_array_equal(a, b)


@needs_compiled
def test_recorded_trial_identical(packed):
    for trial in (0, 2047, 2048, 4099):
        a = kernel.run_recorded(packed, 5, trial, "python")
        b = kernel.run_recorded(packed, 5, trial, "cython")
        assert a[0] == b[0]
        for x, y in zip(a[1:], b[1:]):
            np.testing.assert_array_equal(x, y)


def test_thread_count_does_not_change_counts(packed):
    one = kernel.run_counts(packed, 7000, seed=9, threads=1)
    many = kernel.run_counts(packed, 7000, seed=9, threads=8)
    np.testing.assert_array_equal(one, many)


def test_counts_are_consistent(packed):
    c = kernel.run_counts(packed, 3000, seed=1)
    assert np.all(c[:, 2] <= np.minimum(c[:, 0], c[:, 1]))
    assert np.all(c[:, 4] <= np.minimum(c[:, 0], c[:, 3]))
    assert np.all(c <= 3000) and np.all(c >= 0)


def test_recorded_trial_matches_counts(packed):
    # a single-trial run must count exactly what the recorded replay shows
    theta, acts, ms, _ = kernel.run_recorded(packed, 12, 0, "python")
    c = kernel.run_counts(packed, 1, seed=12, backend="python")
    np.testing.assert_array_equal(c[:, 0], (acts == theta).astype(np.int64))
    np.testing.assert_array_equal(c[:, 1], (ms > 0).astype(np.int64))


def test_env_var_selects_backend(monkeypatch):
    monkeypatch.setenv("SOCIALLEARN_KERNEL", "python")
    assert kernel.backend_name() == "python"
    monkeypatch.setenv("SOCIALLEARN_KERNEL", "auto")
    assert kernel.backend_name() == ("cython" if kernel.compiled_available() else "python")
    monkeypatch.setenv("SOCIALLEARN_KERNEL", "fortran")
    with pytest.raises(ValueError):
        kernel.backend_name()
    assert kernel.backend_name("python") == "python"


ORACLE_CASES = [
    ("line", Policy.IMMEDIATE, None, 0.1),
    ("firstk_sqrt", Policy.FIRST_K, SqrtGrowth(), 0.1),
    ("full", Policy.FIRST_K, FullHistory(), 0.05),
    ("const2", Policy.FIRST_K, Constant(2), 0.0),
]


@pytest.mark.slow
@pytest.mark.parametrize("name,policy,cap,c", ORACLE_CASES, ids=[x[0] for x in ORACLE_CASES])
def test_monte_carlo_matches_oracle(name, policy, cap, c):
    T = 1_000_000
    kw = {"capacity": cap} if cap is not None else {}
    cfg = ScenarioConfig(cost=CostModel.flat(c), policy=policy, N=8, T=T, seed=2024, **kw)
    orc = brute_force_oracle(LinearUnbounded(), c, 8, policy, cap)
    counts = kernel.run_counts(kernel.pack(solve(cfg)), T, cfg.seed, threads=4)
    p_hat = counts[:, 0] / T
    se = np.sqrt(orc.correct * (1 - orc.correct) / T)
    assert np.all(np.abs(p_hat - orc.correct) <= 4 * se), (p_hat, orc.correct)
    q_hat = counts[:, 1] / T
    se_obs = np.sqrt(np.maximum(orc.observe * (1 - orc.observe), 1e-12) / T)
    assert np.all(np.abs(q_hat - orc.observe) <= 4 * se_obs + 1e-12)

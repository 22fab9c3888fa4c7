import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from sdc_converse.channels import bundled
from sdc_converse.exponent import OmegaSolver, SearchSpec
from sdc_converse.oracle import (Code, CodeCountExceeded, code_count, g_n_exhaustive, mc_pc, pc_exact,
                                 pc_optimal_decoder, sequence_law, verify_main_theorem)
from sdc_converse.prob import Channel

LN2 = math.log(2)
SMALL = SearchSpec.logspace(5, refine_rounds=0)
BSC_SPEC = bundled("bsc01_stateless")
STUCK = bundled("stuck_at_memory_beta05")


def rational_channel(seed, shape):
    rng = np.random.default_rng(seed)
    ints = rng.integers(1, 6, size=shape)
    frac = [[[Fraction(int(v), int(row.sum())) for v in row] for row in block] for block in ints]
    return frac, Channel(ints / ints.sum(axis=-1, keepdims=True))


def brute_force(w_frac, p_frac, k_size, m_size):
    """Literal enumeration of every n=1 code, exact arithmetic, first optimum kept."""
    s_n, x_n, y_n = len(w_frac), len(w_frac[0]), len(w_frac[0][0])
    best, arg = Fraction(-1), None
    for se in itertools.product(range(m_size), repeat=s_n):
        for ce in itertools.product(range(x_n), repeat=k_size * s_n):
            enc = np.array(ce).reshape(k_size, s_n)
            for dec in itertools.product(range(k_size), repeat=y_n * m_size):
                d = np.array(dec).reshape(y_n, m_size)
                pc = sum(p_frac[s] * w_frac[s][enc[k, s]][y]
                         for k in range(k_size) for s in range(s_n) for y in range(y_n) if d[y, se[s]] == k)
                if pc > best:
                    best, arg = pc, Code(1, k_size, m_size, np.array(se), enc, d)
    return best / k_size, arg


# P_c of a fixed code

def test_pc_useless_is_one_over_k():
    spec = bundled("useless_binary")
    code = Code(1, 2, 1, [0, 0], [[0, 1], [1, 0]], [[0], [1]])
    assert pc_exact(spec.channel, spec.state_dist, code) == pytest.approx(0.5, abs=1e-15)


def test_pc_noiseless_identity_code():
    spec = bundled("noiseless_binary")
    code = Code(1, 2, 1, [0] * spec.s_size, [[0] * spec.s_size, [1] * spec.s_size], [[0], [1]])
    assert pc_exact(spec.channel, spec.state_dist, code) == pytest.approx(1.0, abs=1e-15)


def test_pc_bsc_hand_value():
    code = Code(1, 2, 1, [0, 0], [[0, 0], [1, 1]], [[0], [1]])
    assert pc_exact(BSC_SPEC.channel, BSC_SPEC.state_dist, code) == pytest.approx(0.9, abs=1e-15)
    code2 = Code(2, 2, 1, [0] * 4, [[0] * 4, [3] * 4], [[0], [0], [1], [1]])
    assert pc_exact(BSC_SPEC.channel, BSC_SPEC.state_dist, code2) == pytest.approx(0.9, abs=1e-15)


def test_sequence_law_first_symbol_most_significant():
    ch = Channel(np.array([[[1.0, 0.0], [0.25, 0.75]]]))
    ps, wn = sequence_law(ch, [1.0], 2)
    assert ps.tolist() == [1.0]
    # x^2 = (1, 0) -> index 2; y^2 = (1, 0) -> index 2
    assert wn[0, 2, 2] == pytest.approx(0.75)
    assert wn[0, 1, 2] == 0.0
    np.testing.assert_allclose(wn.sum(axis=-1), 1.0, atol=1e-15)


def test_mc_estimate_and_determinism():
    res = g_n_exhaustive(BSC_SPEC.channel, BSC_SPEC.state_dist, 2, 2, 1)
    p1, se = mc_pc(BSC_SPEC.channel, BSC_SPEC.state_dist, res.best_code, 200_000, seed=3)
    p2, _ = mc_pc(BSC_SPEC.channel, BSC_SPEC.state_dist, res.best_code, 200_000, seed=3)
    assert p1 == p2
    assert abs(p1 - res.pc_star) <= 4 * se


def test_mc_stuck_at_code():
    res = g_n_exhaustive(STUCK.channel, STUCK.state_dist, 1, 2, 2)
    p, se = mc_pc(STUCK.channel, STUCK.state_dist, res.best_code, 100_000, seed=0)
    assert abs(p - res.pc_star) <= 4 * max(se, 1e-3)


# exhaustive optimum

def test_g_useless():
    spec = bundled("useless_binary")
    res = g_n_exhaustive(spec.channel, spec.state_dist, 1, 2, 1)
    assert f"{res.g_value:.6f}" == "0.693147"
    assert res.pc_star == pytest.approx(0.5, abs=1e-15)


def test_g_noiseless():
    spec = bundled("noiseless_binary")
    res = g_n_exhaustive(spec.channel, spec.state_dist, 1, 2, 1)
    assert res.g_value == 0.0 and f"{res.g_value:.6f}" == "0.000000"


@pytest.mark.parametrize("m_size", [1, 2])
def test_g_stuck_at_frozen(m_size):
    res = g_n_exhaustive(STUCK.channel, STUCK.state_dist, 1, 2, m_size)
    assert res.pc_star == pytest.approx(0.75, abs=1e-12)
    assert res.g_value == pytest.approx(0.2876820724517809, abs=1e-12)


def test_g_stuck_at_against_literal_enumeration():
    w = [[[Fraction(1), Fraction(0)]] * 2, [[Fraction(0), Fraction(1)]] * 2,
         [[Fraction(1), Fraction(0)], [Fraction(0), Fraction(1)]]]
    p = [Fraction(1, 4), Fraction(1, 4), Fraction(1, 2)]
    for m_size in (1, 2):
        pc, code = brute_force(w, p, 2, m_size)
        res = g_n_exhaustive(STUCK.channel, STUCK.state_dist, 1, 2, m_size)
        assert res.pc_star == pytest.approx(float(pc), abs=1e-12)
        assert res.best_code == code


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_g_random_channel_against_literal_enumeration(seed):
    w, ch = rational_channel(seed, (2, 2, 3))
    p = [Fraction(1, 3), Fraction(2, 3)]
    pc, code = brute_force(w, p, 2, 2)
    res = g_n_exhaustive(ch, [1 / 3, 2 / 3], 1, 2, 2)
    assert res.pc_star == pytest.approx(float(pc), abs=1e-12)
    assert res.best_code == code
    assert pc_exact(ch, [1 / 3, 2 / 3], res.best_code) == pytest.approx(res.pc_star, abs=1e-12)


def test_deterministic_codes_suffice():
    rng = np.random.default_rng(0)
    for inst in range(50):
        ch = Channel(rng.dirichlet(np.ones(2), size=(2, 2)))
        ps = rng.dirichlet(np.ones(2))
        best = g_n_exhaustive(ch, ps, 1, 2, 2).pc_star
        for _ in range(1000):
            sp = rng.dirichlet(np.ones(2), size=2)
            cp = rng.dirichlet(np.ones(2), size=(2, 2))
            assert pc_optimal_decoder(ch, ps, 1, sp, cp) <= best + 1e-12


def test_monotone_in_message_sizes():
    for spec in (BSC_SPEC, STUCK):
        g = {(k, m): g_n_exhaustive(spec.channel, spec.state_dist, 1, k, m).g_value
             for k in (2, 3) for m in (1, 2)}
        assert g[2, 2] <= g[2, 1] + 1e-12 and g[3, 2] <= g[3, 1] + 1e-12
        assert g[2, 1] <= g[3, 1] + 1e-12 and g[2, 2] <= g[3, 2] + 1e-12


def test_code_count_guard():
    n = 2
    expected = code_count(STUCK.channel, n, 2, 1)
    assert expected == 1 * (2 ** 2) ** (2 * 9) * 2 ** 4
    with pytest.raises(CodeCountExceeded) as e:
        g_n_exhaustive(STUCK.channel, STUCK.state_dist, n, 2, 1)
    assert e.value.count == expected
    assert str(expected) in str(e.value)


def test_code_validation():
    with pytest.raises(ValueError):
        Code(1, 2, 1, [0, 1], [[0, 0], [1, 1]], [[0], [1]])
    with pytest.raises(ValueError):
        Code(1, 2, 1, [0, 0], [[0, 0]], [[0], [1]])
    code = Code(1, 2, 1, [0, 0], [[0, 0], [5, 1]], [[0], [1]])
    with pytest.raises(ValueError):
        code.check(BSC_SPEC.channel)


# the converse on exhaustive instances

def test_main_theorem_useless():
    spec = bundled("useless_binary")
    rep = verify_main_theorem(spec.channel, spec.state_dist, 1, 2, 1, SMALL)
    assert rep.g_value == pytest.approx(LN2)
    assert rep.passed
    assert rep.pc_star <= rep.pc_bound


@pytest.mark.parametrize("name", ["useless_binary", "noiseless_binary", "bsc01_stateless",
                                  "stuck_at_memory_beta05"])
def test_main_theorem_small_search(name):
    spec = bundled(name)
    solver = OmegaSolver(spec.channel)
    for k, m in ((2, 1), (2, 2), (3, 1)):
        rep = verify_main_theorem(spec.channel, spec.state_dist, 1, k, m, SMALL, solver=solver)
        assert rep.passed, rep

import math

import numpy as np
import pytest
from scipy import stats

from coordline.codebooks import (
    Codebook,
    build_chain,
    build_codebooks,
    chain_channel_output,
    chain_from_line_h2,
    codeword_count,
    k_minus,
    k_plus,
    l_of,
    m_minus,
    m_plus,
    typical_list_size,
)
from coordline.errors import ResourceCapError, UsageError
from coordline.linestruct import aux_from_tags, copy_of, make_network
from coordline.probability import info_measure, pmf_from_table
from coordline.rates import CodebookRates


def dsbs_network(p=0.25):
    w = [[(1 - p) / 2, p / 2], [p / 2, (1 - p) / 2]]
    return make_network(2, w)


def dsbs_spec(p=0.25):
    return aux_from_tags(dsbs_network(p), a_tags={(1, 2): copy_of("X2")})


def h2_rates(mu_p=0.5, mu_m=0.5, lam2=0.0):
    return CodebookRates.for_network(2, mu_plus={(1, 2): mu_p}, mu_minus={(1, 2): mu_m},
                                     lam={2: lam2})


def h3_chain_spec(p=0.25):
    flip = np.array([[1 - p, p], [p, 1 - p]])
    w = np.einsum("a,ab,bc->abc", [0.5, 0.5], flip, flip)
    net = make_network(3, w)
    return aux_from_tags(net, a_tags={(1, 2): copy_of("X2"), (1, 3): copy_of("X3"),
                                      (2, 3): copy_of("X3")})


class TestSizes:
    def test_ceil_rule(self):
        assert codeword_count(3, 1.0) == 8
        assert codeword_count(4, 0.3) == math.ceil(2 ** 1.2)
        assert codeword_count(5, 0.0) == 1

    def test_snap_guard(self):
        # n*rate arithmetic that lands a hair above an integer must not bump up
        assert codeword_count(3, 0.2 + 0.2 + 0.2 + 0.2 + 0.2) == 8


class TestBuildAndLookup:
    def test_constant_alphabet_single_codeword(self):
        net = dsbs_network()
        spec = aux_from_tags(net)  # A constant
        cb = build_codebooks(spec, h2_rates(0.0, 1.0, 1.0), n=3, seed=1)
        w0 = cb.a_codeword((1, 2), {m_plus((1, 2)): 0, m_minus((1, 2)): 0})
        w1 = cb.a_codeword((1, 2), {m_plus((1, 2)): 0, m_minus((1, 2)): 7})
        assert np.array_equal(w0, np.zeros(3))
        assert np.array_equal(w0, w1)

    def test_seed_determinism_and_difference(self):
        spec = dsbs_spec()
        r = h2_rates(0.7, 0.7, 0.4)
        cb1 = build_codebooks(spec, r, n=3, seed=42)
        cb2 = build_codebooks(spec, r, n=3, seed=42)
        cb3 = build_codebooks(spec, r, n=3, seed=43)
        assert cb1.to_text() == cb2.to_text()
        assert cb1.to_text() != cb3.to_text()

    def test_h3_nesting_ignores_foreign_indices(self):
        spec = h3_chain_spec()
        rates = CodebookRates.for_network(
            3, mu_plus={(1, 2): 0.4, (1, 3): 0.4, (2, 3): 0.4},
            mu_minus={(1, 2): 0.4, (1, 3): 0.4, (2, 3): 0.4},
            lam={2: 0.4, 3: 0.4})
        cb = build_codebooks(spec, rates, n=2, seed=5)
        base = {m_plus(p): 0 for p in [(1, 2), (1, 3), (2, 3)]}
        base.update({m_minus(p): 0 for p in [(1, 2), (1, 3), (2, 3)]})
        ref = cb.a_codeword((1, 2), base)
        # A_{1,2} depends only on indices in phibar(1,2) = {(1,2), (1,3)}
        for v in range(cb.sizes[m_plus((2, 3))]):
            probe = dict(base)
            probe[m_plus((2, 3))] = v
            assert np.array_equal(cb.a_codeword((1, 2), probe), ref)
        # ... and changes with its own index (exhaustive check finds a change)
        seen = {tuple(ref)}
        for v in range(1, cb.sizes[m_plus((1, 2))]):
            probe = dict(base)
            probe[m_plus((1, 2))] = v
            seen.add(tuple(cb.a_codeword((1, 2), probe)))
        assert len(seen) > 1

    def test_rate_zero_books_have_one_codeword(self):
        spec = dsbs_spec()
        cb = build_codebooks(spec, h2_rates(0.0, 0.0, 0.0), n=4, seed=9)
        assert cb.sizes[m_plus((1, 2))] == 1
        assert cb.sizes[l_of(2)] == 1

    def test_out_of_range_index(self):
        spec = dsbs_spec()
        cb = build_codebooks(spec, h2_rates(0.5, 0.5), n=2, seed=0)
        with pytest.raises(UsageError):
            cb.a_codeword((1, 2), {m_plus((1, 2)): 99, m_minus((1, 2)): 0})

    def test_cap(self):
        spec = dsbs_spec()
        with pytest.raises(ResourceCapError):
            build_codebooks(spec, h2_rates(3.0, 3.0, 3.0), n=10, seed=0, cap=1000)

    def test_text_roundtrip(self):
        spec = dsbs_spec()
        r = h2_rates(0.6, 0.6, 0.5)
        cb = build_codebooks(spec, r, n=3, seed=11)
        clone = Codebook.from_text(cb.to_text(), spec, r)
        probe = {m_plus((1, 2)): 1, m_minus((1, 2)): 2,
                 k_plus(1): 0, k_minus(1): 0, l_of(2): 1}
        assert np.array_equal(cb.a_codeword((1, 2), probe), clone.a_codeword((1, 2), probe))
        assert np.array_equal(cb.c_codeword(2, probe), clone.c_codeword(2, probe))
        assert clone.to_text() == cb.to_text()

    def test_positionwise_marginal_matches_kernel(self):
        # chi-square sanity check across seeds on one fixed codeword position
        spec = dsbs_spec()
        r = h2_rates(0.7, 0.0)
        counts = np.zeros(2)
        seeds = 400
        for s in range(seeds):
            cb = build_codebooks(spec, r, n=2, seed=s)
            w = cb.a_codeword((1, 2), {m_plus((1, 2)): 1, m_minus((1, 2)): 0})
            counts[w[0]] += 1
        # A = X2 marginal is uniform
        chi2 = ((counts - seeds / 2) ** 2 / (seeds / 2)).sum()
        assert chi2 < stats.chi2.ppf(0.999, df=1)

    def test_exact_divisor_book_enumerates_blocks(self):
        # uniform conditional with count == |alphabet|^n covers every block once
        net = make_network(2, np.full((2, 2), 0.25))
        spec = aux_from_tags(net)  # C2 = X2 uniform, all else constant
        cb = build_codebooks(spec, h2_rates(0.0, 0.0, 1.0), n=2, seed=3)
        words = {tuple(cb.c_codeword(2, {m_plus((1, 2)): 0, m_minus((1, 2)): 0,
                                         k_plus(1): 0, k_minus(1): 0, l_of(2): l}))
                 for l in range(4)}
        assert words == {(0, 0), (0, 1), (1, 0), (1, 1)}


class TestChain:
    def make_chain(self, seed=0, n=6, nu=(0.5, 0.5)):
        # D1 - D2 - Y: D1 fair bit, D2 = D1 xor noise(0.2), Y = D2 xor noise(0.2)
        flip = lambda eps: np.array([[1 - eps, eps], [eps, 1 - eps]])
        w = np.einsum("a,ab,bc->abc", [0.5, 0.5], flip(0.2), flip(0.2))
        joint = pmf_from_table(["D1", "D2", "Y"], w)
        return joint, build_chain(joint, ["D1", "D2"], "Y", nu, n=n, seed=seed)

    def test_atypical_observation_counts_zero(self):
        joint, chain = self.make_chain()
        # impossible under a 0.05-ball: constant sequence is never 0.05-typical
        assert typical_list_size(chain, [0] * 6, 0.05) == 0

    def test_generating_tuple_usually_counted(self):
        hits = 0
        trials = 60
        for s in range(trials):
            joint, chain = self.make_chain(seed=s, n=8)
            rng = np.random.default_rng(1000 + s)
            y = chain_channel_output(chain, (0, 0), rng)
            # letter typicality with delta < 1 forces every positive-probability
            # joint symbol to appear, hopeless at n=8; use a coarse ball
            count = typical_list_size(chain, y, 1.5)
            hits += count >= 1
        assert hits / trials > 0.5

    def test_ensemble_mean_respects_list_size_bound(self):
        delta = 0.35
        n = 8
        total = 0.0
        seeds = 220
        for s in range(seeds):
            joint, chain = self.make_chain(seed=s, n=n, nu=(0.4, 0.4))
            rng = np.random.default_rng(5000 + s)
            flat = rng.integers(0, chain.tuple_count())
            l1, l2 = divmod(int(flat), chain.sizes[1])
            y = chain_channel_output(chain, (l1, l2), rng)
            total += typical_list_size(chain, y, delta)
        mean = total / seeds
        joint, _ = self.make_chain()
        mi = info_measure(joint, ["D1", "D2"], ["Y"])
        k_const = 2 * 2 * 2
        bound = (2 + 1) * 2 ** (n * (0.8 - mi + 2 * delta * math.log2(k_const)))
        assert mean <= bound

    def test_line_h2_view(self):
        spec = dsbs_spec()
        cb = build_codebooks(spec, h2_rates(0.5, 0.5, 0.5), n=3, seed=2)
        chain = chain_from_line_h2(cb, y_node=2)
        assert chain.k == 3
        # level-0 codewords coincide with the A-book
        w = chain.codeword(0, (1,))
        assert np.array_equal(w, cb.a_codeword((1, 2), {m_plus((1, 2)): 0, m_minus((1, 2)): 1}))

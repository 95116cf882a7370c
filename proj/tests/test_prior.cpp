#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "dvq/autoregressive_prior.hpp"
#include "dvq/errors.hpp"

using namespace dvq;

TEST_CASE("per-step distributions are normalized") {
    prior::IndexPrior model({8, 4, 4, 4, 4, 4, 4}, 8, 32, 51);
    std::mt19937_64 rng(52);
    std::uniform_int_distribution<int> pick_o(0, 7), pick_h(0, 3);
    for (int t = 0; t < 30; ++t) {
        const int l_o = pick_o(rng);
        std::vector<int> prefix;
        for (int pos = 0; pos < model.positions(); ++pos) {
            Eigen::VectorXd p = model.step_probs(l_o, prefix, pos);
            CHECK(std::abs(p.sum() - 1.0) < 1e-5);
            CHECK(p.minCoeff() >= 0.0);
            prefix.push_back(pick_h(rng));
        }
    }
}

TEST_CASE("untrained model is near-uniform: NLL about sum of ln S") {
    const int S = 16;
    prior::IndexPrior model({4, S, S, S, S, S, S}, 8, 32, 53);
    prior::IndexSequence seq;
    seq.l_o = 1;
    seq.l_h = {3, 7, 11, 0, 5, 9};
    const double expect = 6.0 * std::log(static_cast<double>(S));
    CHECK(std::abs(-model.sequence_logprob(seq) - expect) < 0.1 * expect);
}

TEST_CASE("degenerate corpus is memorized: NLL < 0.05") {
    prior::IndexSequence seq;
    seq.l_o = 2;
    seq.l_h = {1, 3, 0, 2, 1, 3};
    std::vector<prior::IndexSequence> corpus(32, seq);
    auto fit = prior::fit_prior(corpus, {4, 4, 4, 4, 4, 4, 4}, 300, 54, /*lr=*/3e-3);
    CHECK(-fit.model.sequence_logprob(seq) < 0.05);
    CHECK(fit.model.fitted());

    // NLL decreases monotonically over the first 5 epochs.
    for (int e = 1; e < 5; ++e) CHECK(fit.nll_per_epoch[e] <= fit.nll_per_epoch[e - 1]);
    // The memorized sequence is the argmax / maximal-logprob sequence.
    prior::IndexSequence other = seq;
    other.l_h[2] = 1;
    CHECK(fit.model.sequence_logprob(seq) > fit.model.sequence_logprob(other));
}

TEST_CASE("two equiprobable sequences are sampled half/half") {
    prior::IndexSequence a, b;
    a.l_o = 0;
    a.l_h = {0, 0, 0, 0, 0, 0};
    b = a;
    b.l_h[0] = 2;  // differ only at hand position 1
    std::vector<prior::IndexSequence> corpus;
    for (int i = 0; i < 16; ++i) {
        corpus.push_back(a);
        corpus.push_back(b);
    }
    auto fit = prior::fit_prior(corpus, {2, 3, 3, 3, 3, 3, 3}, 250, 55, /*lr=*/3e-3);

    std::mt19937_64 rng(56);
    int count_a = 0, total = 2000;
    for (int i = 0; i < total; ++i) {
        auto s = fit.model.sample(0, 1.0, rng);
        if (s[0] == 0) ++count_a;
    }
    const double freq = static_cast<double>(count_a) / total;
    CHECK(std::abs(freq - 0.5) < 0.05);
}

TEST_CASE("exhaustive enumeration: total sequence mass is 1") {
    prior::IndexPrior model({2, 2, 2}, 6, 16, 57);
    for (int l_o = 0; l_o < 2; ++l_o) {
        double mass = 0.0;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                prior::IndexSequence s;
                s.l_o = l_o;
                s.l_h = {a, b};
                mass += std::exp(model.sequence_logprob(s));
            }
        CHECK(std::abs(mass - 1.0) < 1e-4);
    }
}

TEST_CASE("causality: later context tokens never influence earlier steps") {
    prior::IndexPrior model({4, 3, 3, 3, 3, 3, 3}, 8, 32, 58);
    std::mt19937_64 rng(59);
    std::uniform_int_distribution<int> pick_o(0, 3), pick_h(0, 2);
    for (int trial = 0; trial < 100; ++trial) {
        const int l_o = pick_o(rng);
        std::vector<int> ctx(6), altered;
        for (auto& v : ctx) v = pick_h(rng);
        altered = ctx;
        altered[3] = (altered[3] + 1) % 3;  // intervene on l_4
        altered[5] = (altered[5] + 2) % 3;
        for (int pos = 0; pos <= 2; ++pos) {  // steps for l_1..l_3
            Eigen::VectorXd p = model.step_probs(l_o, ctx, pos);
            Eigen::VectorXd q = model.step_probs(l_o, altered, pos);
            CHECK((p - q).norm() == 0.0);
        }
    }
}

TEST_CASE("sampling is deterministic per seed and argmax in the cold limit") {
    prior::IndexPrior model({4, 5, 5, 5, 5, 5, 5}, 8, 32, 60);
    std::mt19937_64 r1(61), r2(61);
    auto s1 = model.sample(2, 1.0, r1);
    auto s2 = model.sample(2, 1.0, r2);
    CHECK(s1 == s2);
    for (int v : s1) {
        CHECK(v >= 0);
        CHECK(v < 5);
    }

    std::mt19937_64 r3(62);
    auto cold = model.sample(2, 1e-9, r3);
    std::vector<int> greedy;
    for (int pos = 0; pos < model.positions(); ++pos) {
        Eigen::VectorXd p = model.step_probs(2, greedy, pos);
        int best = 0;
        p.maxCoeff(&best);
        greedy.push_back(best);
    }
    CHECK(cold == greedy);
}

TEST_CASE("invalid inputs are rejected") {
    prior::IndexPrior model({4, 3, 3, 3, 3, 3, 3}, 8, 32, 63);
    std::mt19937_64 rng(64);
    CHECK_THROWS_AS(model.sample(7, 1.0, rng), InvalidInputError);
    CHECK_THROWS_AS(model.sample(-1, 1.0, rng), InvalidInputError);
    CHECK_THROWS_AS(model.sample(1, 0.0, rng), InvalidParameterError);
    prior::IndexSequence bad;
    bad.l_o = 0;
    bad.l_h = {0, 0};
    CHECK_THROWS_AS(model.sequence_logprob(bad), InvalidInputError);
    CHECK_THROWS_AS(prior::fit_prior({}, {4, 4}, 1, 1), InvalidInputError);
}

TEST_CASE("prior checkpoint round trip preserves the distribution") {
    prior::IndexSequence seq;
    seq.l_o = 1;
    seq.l_h = {0, 2, 1, 0, 2, 1};
    std::vector<prior::IndexSequence> corpus(8, seq);
    auto fit = prior::fit_prior(corpus, {3, 3, 3, 3, 3, 3, 3}, 40, 65, /*lr=*/3e-3);

    const auto path = (std::filesystem::temp_directory_path() / "dvq_prior_test.bin").string();
    fit.model.save(path);
    prior::IndexPrior re = prior::IndexPrior::load(path);
    std::filesystem::remove(path);

    CHECK(re.fitted());
    CHECK(re.vocab() == fit.model.vocab());
    CHECK(re.sequence_logprob(seq) == doctest::Approx(fit.model.sequence_logprob(seq)));
}

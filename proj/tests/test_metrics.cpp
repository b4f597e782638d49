#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "bfv/errors.hpp"
#include "bfv/metrics.hpp"
#include "metric_oracles.hpp"

using namespace bfv;
using namespace bfv::metrics;

using namespace bfv::oracle;

namespace {

constexpr double kTol = 1e-10;

void check_example(const ExampleScores& got, const ExampleScores& want)
{
    CHECK(std::abs(got.acc - want.acc) < kTol);
    CHECK(std::abs(got.hamming_score - want.hamming_score) < kTol);
    CHECK(std::abs(got.precision - want.precision) < kTol);
    CHECK(std::abs(got.recall - want.recall) < kTol);
    CHECK(std::abs(got.f1 - want.f1) < kTol);
}

void check_clustering(const ClusteringScores& got, const ClusteringScores& want)
{
    CHECK(std::abs(got.homogeneity - want.homogeneity) < kTol);
    CHECK(std::abs(got.completeness - want.completeness) < kTol);
    CHECK(std::abs(got.nmi - want.nmi) < kTol);
    CHECK(std::abs(got.adjusted_rand - want.adjusted_rand) < kTol);
    CHECK(std::abs(got.adjusted_mi - want.adjusted_mi) < kTol);
}

} // namespace

TEST_CASE("example metrics hand cases")
{
    Eigen::MatrixXi y(1, 3), p(1, 3);
    y << 1, 1, 0;
    p << 0, 1, 1;
    auto s = example_metrics(y, p);
    CHECK(s.hamming_score == doctest::Approx(1.0 / 3));
    CHECK(s.precision == doctest::Approx(0.5));
    CHECK(s.recall == doctest::Approx(0.5));
    CHECK(s.f1 == doctest::Approx(0.5));
    CHECK(s.acc == 0.0);

    y << 1, 0, 0;
    p << 0, 0, 0;
    s = example_metrics(y, p);
    CHECK(s.precision == 0.0);
    CHECK(s.recall == 0.0);
    CHECK(s.f1 == 0.0);
    CHECK(s.hamming_score == 0.0);

    s = example_metrics(y, y);
    CHECK(s.acc == 1.0);
    CHECK(s.f1 == 1.0);
    CHECK(s.precision == 1.0);
}

TEST_CASE("example and macro metrics match set oracles on every small instance")
{
    // Exhaustive over every gold/prediction pair when N·M ≤ 6.
    int instances = 0;
    for (Index n = 1; n <= 8; ++n)
        for (Index m = 1; m <= 4; ++m) {
            if (n * m > 6)
                continue;
            const unsigned total = 1U << (n * m);
            for (unsigned gb = 0; gb < total; ++gb)
                for (unsigned pb = 0; pb < total; ++pb) {
                    const auto y = decode(gb, n, m);
                    const auto p = decode(pb, n, m);
                    check_example(example_metrics(y, p), example_oracle(y, p));
                    const auto got = macro_prf(y, p);
                    const auto want = macro_oracle(y, p);
                    CHECK(std::abs(got.precision - want.precision) < kTol);
                    CHECK(std::abs(got.recall - want.recall) < kTol);
                    CHECK(std::abs(got.f1 - want.f1) < kTol);
                    ++instances;
                }
        }
    CHECK(instances > 10000);
}

TEST_CASE("example and macro metrics match oracles on random N=8, M=4 instances")
{
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<unsigned> bits(0, 0xffffffffU);
    for (int t = 0; t < 2000; ++t) {
        const auto y = decode(bits(rng), 8, 4);
        const auto p = decode(bits(rng), 8, 4);
        check_example(example_metrics(y, p), example_oracle(y, p));
        const auto got = macro_prf(y, p);
        const auto want = macro_oracle(y, p);
        CHECK(std::abs(got.f1 - want.f1) < kTol);
    }
}

TEST_CASE("macro prf hand cases")
{
    Eigen::MatrixXi y(2, 2), p(2, 2);
    y << 1, 0, 0, 1;
    p << 1, 1, 0, 0;
    const auto s = macro_prf(y, p);
    CHECK(s.f1 == doctest::Approx(0.5 * (1.0 + 0.0)));
    const auto perfect = macro_prf(y, y);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);
}

TEST_CASE("average precision hand case and oracle")
{
    Eigen::VectorXi g(4);
    g << 1, 0, 1, 0;
    Eigen::VectorXd s(4);
    s << 0.9, 0.8, 0.7, 0.6;
    CHECK(*average_precision(g, s) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK_FALSE(average_precision(Eigen::VectorXi::Zero(4), s).has_value());

    // Every gold vector for N ≤ 8 against distinct and heavily tied scores.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    std::uniform_int_distribution<int> level(0, 2);
    for (Index n = 1; n <= 8; ++n) {
        Eigen::VectorXd distinct(n), tied(n);
        for (Index i = 0; i < n; ++i) {
            distinct(i) = u(rng);
            tied(i) = level(rng) / 2.0;
        }
        for (unsigned bits = 0; bits < (1U << n); ++bits) {
            Eigen::VectorXi gv(n);
            for (Index i = 0; i < n; ++i)
                gv(i) = (bits >> i) & 1U;
            for (const auto& sc : {distinct, tied}) {
                const auto got = average_precision(gv, sc);
                const auto want = ap_oracle(gv, sc);
                REQUIRE(got.has_value() == want.has_value());
                if (got)
                    CHECK(std::abs(*got - *want) < kTol);
            }
        }
    }
}

TEST_CASE("roc auc with midranks matches pairwise oracle")
{
    Eigen::VectorXi g(4);
    g << 1, 1, 0, 0;
    CHECK(*roc_auc(g, Eigen::Vector4d(0.9, 0.8, 0.1, 0.2)) == doctest::Approx(1.0));
    CHECK(*roc_auc(g, Eigen::Vector4d::Constant(0.3)) == doctest::Approx(0.5));
    CHECK_FALSE(roc_auc(Eigen::VectorXi::Ones(4), Eigen::Vector4d::Zero()).has_value());

    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> level(0, 3);
    std::uniform_real_distribution<double> u(0, 1);
    for (Index n = 2; n <= 8; ++n) {
        Eigen::VectorXd tied(n), distinct(n);
        for (Index i = 0; i < n; ++i) {
            tied(i) = level(rng);
            distinct(i) = u(rng);
        }
        for (unsigned bits = 0; bits < (1U << n); ++bits) {
            Eigen::VectorXi gv(n);
            for (Index i = 0; i < n; ++i)
                gv(i) = (bits >> i) & 1U;
            for (const auto& sc : {distinct, tied}) {
                const auto got = roc_auc(gv, sc);
                const auto want = auc_oracle(gv, sc);
                REQUIRE(got.has_value() == want.has_value());
                if (got)
                    CHECK(std::abs(*got - *want) < kTol);
            }
        }
    }
}

TEST_CASE("apk hand cases and exhaustive rankings")
{
    CHECK(apk({2}, {2, 0, 1}, 3) == 1.0);
    CHECK(apk({0}, {2, 0, 1}, 3) == doctest::Approx(0.5));
    CHECK(apk({}, {0, 1}, 3) == 0.0);

    // All gold subsets of 4 topics against all 24 rankings.
    std::vector<Index> ranking = {0, 1, 2, 3};
    do {
        for (unsigned bits = 0; bits < 16; ++bits) {
            std::vector<Index> actual;
            for (Index j = 0; j < 4; ++j)
                if ((bits >> j) & 1U)
                    actual.push_back(j);
            for (Index k = 1; k <= 4; ++k)
                CHECK(std::abs(apk(actual, ranking, k) - apk_oracle(actual, ranking, k)) < kTol);
        }
    } while (std::next_permutation(ranking.begin(), ranking.end()));
}

TEST_CASE("map at 3 averages over examples with gold labels")
{
    Eigen::MatrixXi y(3, 4);
    y << 1, 0, 0, 0,
         0, 0, 0, 0,
         0, 1, 1, 0;
    Eigen::MatrixXd s(3, 4);
    s << 0.1, 0.9, 0.2, 0.0,
         0.5, 0.5, 0.5, 0.5,
         0.1, 0.8, 0.3, 0.9;
    // Row 0: gold ranked 3rd → 1/3. Row 2: ranking 3,1,2 → (1/2 + 2/3)/2.
    const double want = (1.0 / 3.0 + (0.5 + 2.0 / 3.0) / 2.0) / 2.0;
    CHECK(std::abs(*map_at_k(y, s, 3) - want) < 1e-12);
}

TEST_CASE("clustering metrics match entropy, pair-count and permutation oracles exhaustively")
{
    // Every pair of labelings of N ≤ 5 points over three labels.
    int instances = 0;
    for (std::size_t n = 2; n <= 5; ++n) {
        std::size_t total = 1;
        for (std::size_t i = 0; i < n; ++i)
            total *= 3;
        for (std::size_t ga = 0; ga < total; ++ga)
            for (std::size_t gb = 0; gb < total; ++gb) {
                std::vector<int> a(n), b(n);
                std::size_t x = ga, y = gb;
                for (std::size_t i = 0; i < n; ++i) {
                    a[i] = static_cast<int>(x % 3);
                    b[i] = static_cast<int>(y % 3);
                    x /= 3;
                    y /= 3;
                }
                check_clustering(clustering_metrics(a, b), clustering_oracle(a, b));
                ++instances;
            }
    }
    CHECK(instances > 60000);
}

TEST_CASE("clustering metrics match oracles on random labelings with N = 7, 8 and four labels")
{
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> lab(0, 3);
    for (std::size_t n : {7U, 8U})
        for (int t = 0; t < 4; ++t) {
            std::vector<int> a(n), b(n);
            for (std::size_t i = 0; i < n; ++i) {
                a[i] = lab(rng);
                b[i] = lab(rng);
            }
            check_clustering(clustering_metrics(a, b), clustering_oracle(a, b));
        }
}

TEST_CASE("clustering conventions")
{
    const auto one = clustering_metrics({0, 0, 0}, {5, 5, 5});
    CHECK(one.adjusted_rand == 1.0);
    CHECK(one.adjusted_mi == 1.0);
    CHECK(one.nmi == 1.0);

    const auto relabeled = clustering_metrics({0, 0, 1, 1, 2}, {7, 7, 3, 3, 9});
    CHECK(relabeled.homogeneity == doctest::Approx(1.0));
    CHECK(relabeled.completeness == doctest::Approx(1.0));
    CHECK(relabeled.adjusted_rand == doctest::Approx(1.0));
    CHECK(relabeled.adjusted_mi == doctest::Approx(1.0));

    CHECK_THROWS_AS(clustering_metrics({0}, {0}), ContractError);
}

TEST_CASE("chance-adjusted clustering metrics are near zero on independent labelings")
{
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<int> lab(0, 3);
    for (int t = 0; t < 10; ++t) {
        std::vector<int> a(200), b(200);
        for (int i = 0; i < 200; ++i) {
            a[static_cast<std::size_t>(i)] = lab(rng);
            b[static_cast<std::size_t>(i)] = lab(rng);
        }
        const auto s = clustering_metrics(a, b);
        CHECK(std::abs(s.adjusted_rand) < 0.1);
        CHECK(std::abs(s.adjusted_mi) < 0.1);
    }
}

TEST_CASE("evaluate reduces to single-label examples for clustering")
{
    Eigen::MatrixXi y(4, 2);
    y << 1, 0,
         0, 1,
         1, 1,
         0, 1;
    Eigen::MatrixXd p(4, 2);
    p << 0.9, 0.2,
         0.1, 0.7,
         0.6, 0.6,
         0.3, 0.8;
    Eigen::MatrixXi b = (p.array() > 0.5).cast<int>();
    const auto r = evaluate(y, p, b);
    CHECK(r.examples == 4);
    CHECK(r.clustering_examples == 3);
    REQUIRE(r.clustering.has_value());
    CHECK(r.clustering->adjusted_rand == doctest::Approx(1.0));
    CHECK(r.example.f1 == 1.0);
    const auto json = report_json(r, "provenance: test");
    CHECK(json.find("\"f1\": 1.0") != std::string::npos);
}

TEST_CASE("metric entry points reject shape mismatches")
{
    CHECK_THROWS_AS(example_metrics(Eigen::MatrixXi::Zero(2, 2), Eigen::MatrixXi::Zero(2, 3)), ContractError);
    CHECK_THROWS_AS(macro_prf(Eigen::MatrixXi::Zero(2, 2), Eigen::MatrixXi::Zero(3, 2)), ContractError);
    CHECK_THROWS_AS(map_at_k(Eigen::MatrixXi::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2), 0), ContractError);
}

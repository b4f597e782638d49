#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "bfv/errors.hpp"
#include "bfv/guidance.hpp"

using namespace bfv;
using namespace bfv::guidance;

namespace {

GuidanceMatrix random_guidance(Index n, Index m, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    GuidanceMatrix g;
    g.values.resize(n, m);
    for (Index i = 0; i < g.values.size(); ++i)
        g.values.data()[i] = u(rng);
    for (Index j = 0; j < m; ++j)
        g.topics.push_back("t" + std::to_string(j));
    for (Index i = 0; i < n; ++i)
        g.doc_ids.push_back("d" + std::to_string(i));
    return g;
}

} // namespace

TEST_CASE("min-max scaling")
{
    Tensor raw(3, 3);
    raw << 2, 5, -1,
           4, 5, 0,
           6, 5, 1;
    const Tensor s = scale_unit_interval(raw);
    CHECK(s(0, 0) == 0.0);
    CHECK(s(1, 0) == 0.5);
    CHECK(s(2, 0) == 1.0);
    CHECK((s.col(1).array() == 0.5).all());
    CHECK(s(1, 2) == 0.5);

    ingest::NumericTable t{raw, {"a", "b", "c"}, {"x", "y", "z"}};
    CHECK(scale_unit_interval(t, Source::zero_shot, false).values == s);
    CHECK_THROWS_AS(scale_unit_interval(t, Source::zero_shot, true), ContractError);

    ingest::NumericTable p{Tensor::Constant(2, 1, 0.3), {"a"}, {"x", "y"}};
    CHECK((scale_unit_interval(p, Source::zero_shot, true).values.array() == 0.3).all());
}

TEST_CASE("combine endpoints reproduce their source exactly")
{
    const auto a = random_guidance(50, 4, 1);
    const auto b = random_guidance(50, 4, 2);
    CHECK(combine(a, b, 1.0).values == a.values);
    CHECK(combine(a, b, 0.0).values == b.values);
    CHECK(combine(a, a, 0.37).values == a.values);
    const auto mid = combine(a, b, 0.25);
    CHECK(mid.source == Source::mixed);
    CHECK((mid.values - (0.25 * a.values + 0.75 * b.values)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(mid.values.minCoeff() >= 0.0);
    CHECK(mid.values.maxCoeff() <= 1.0);
}

TEST_CASE("combine rejects bad inputs")
{
    const auto a = random_guidance(5, 2, 1);
    auto b = random_guidance(5, 2, 2);
    CHECK_THROWS_AS(combine(a, b, -0.1), ContractError);
    CHECK_THROWS_AS(combine(a, b, 1.5), ContractError);
    CHECK_THROWS_AS(combine(a, b, std::nan("")), ContractError);
    CHECK_THROWS_AS(combine(a, random_guidance(4, 2, 3), 0.5), AlignmentError);
    b.topics = {"t1", "t0"};
    CHECK_THROWS_AS(combine(a, b, 0.5), AlignmentError);
    auto c = random_guidance(5, 2, 4);
    c.values(0, 0) = 1.2;
    CHECK_THROWS_AS(combine(a, c, 0.5), ContractError);
}

TEST_CASE("topic selection, row selection and file round trip")
{
    const auto g = random_guidance(4, 3, 5);
    const auto s = select_topics(g, {"t2", "t0"});
    CHECK(s.values.col(0) == g.values.col(2));
    CHECK(s.values.col(1) == g.values.col(0));
    const auto r = take_rows(g, {3, 1});
    CHECK(r.doc_ids == std::vector<std::string>{"d3", "d1"});
    CHECK(r.values.row(0) == g.values.row(3));

    const auto p = std::filesystem::temp_directory_path() / "bfv_test_guidance.csv";
    write_guidance(p, g, "note");
    const auto back = read_guidance(p, Source::zero_shot, true);
    CHECK(back.topics == g.topics);
    CHECK(back.doc_ids == g.doc_ids);
    CHECK((back.values - g.values).cwiseAbs().maxCoeff() == 0.0);
}

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>

#include "bfv/errors.hpp"
#include "bfv/ingest/formats.hpp"
#include "bfv/ingest/pooling.hpp"
#include "bfv/ingest/preprocess.hpp"
#include "bfv/log.hpp"

using namespace bfv;
using namespace bfv::ingest;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "bfv_test_ingest";
    fs::create_directories(dir);
    return dir / name;
}

void write_raw(const fs::path& p, const std::function<void(std::ostream&)>& body)
{
    std::ofstream out(p, std::ios::binary);
    body(out);
}

TokenDocument doc(std::initializer_list<std::initializer_list<float>> rows, std::vector<std::string> toks)
{
    TokenDocument d;
    const Index t = static_cast<Index>(rows.size());
    const Index v = static_cast<Index>(rows.begin()->size());
    d.vectors.resize(t, v);
    Index i = 0;
    for (const auto& r : rows) {
        Index j = 0;
        for (float x : r)
            d.vectors(i, j++) = x;
        ++i;
    }
    d.tokens = std::move(toks);
    return d;
}

LabelMatrix label_matrix(const Eigen::MatrixXi& v)
{
    LabelMatrix l;
    l.values = v;
    for (Index j = 0; j < v.cols(); ++j)
        l.topics.push_back("c" + std::to_string(j));
    for (Index i = 0; i < v.rows(); ++i)
        l.doc_ids.push_back("d" + std::to_string(i));
    return l;
}

} // namespace

TEST_CASE("BFVE round trip is bit-exact on the 32-bit payload")
{
    std::mt19937_64 rng(1);
    std::normal_distribution<float> dist;
    EmbeddingMatrix m;
    m.rows.resize(5, 7);
    for (Index i = 0; i < m.rows.size(); ++i)
        m.rows.data()[i] = static_cast<double>(dist(rng));
    const auto p = temp_path("rt.bfve");
    write_embeddings(p, m);
    const auto back = read_embeddings(p);
    REQUIRE(back.n() == 5);
    REQUIRE(back.dim() == 7);
    CHECK((back.rows.array() == m.rows.array()).all());
    CHECK(fs::file_size(p) == 16 + 5 * 7 * 4);
}

TEST_CASE("BFVE reader errors")
{
    const auto p = temp_path("bad.bfve");
    write_raw(p, [](std::ostream& out) {
        out.write("XFVE", 4);
        wire::put_u32(out, 1);
        wire::put_u32(out, 2);
        wire::put_u32(out, 3);
        for (int i = 0; i < 6; ++i)
            wire::put_f32(out, 1.0f);
    });
    CHECK_THROWS_AS(read_embeddings(p), FormatError);

    write_raw(p, [](std::ostream& out) {
        wire::put_magic(out, "BFVE");
        wire::put_u32(out, 1);
        wire::put_u32(out, 2);
        wire::put_u32(out, 3);
        for (int i = 0; i < 5; ++i)
            wire::put_f32(out, 1.0f);
    });
    CHECK_THROWS_AS(read_embeddings(p), LengthError);

    write_raw(p, [](std::ostream& out) {
        wire::put_magic(out, "BFVE");
        wire::put_u32(out, 1);
        wire::put_u32(out, 2);
        wire::put_u32(out, 3);
        for (int i = 0; i < 6; ++i)
            wire::put_f32(out, i == 4 ? std::numeric_limits<float>::quiet_NaN() : 1.0f);
    });
    try {
        read_embeddings(p);
        FAIL("expected a data error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }

    write_raw(p, [](std::ostream& out) {
        wire::put_magic(out, "BFVE");
        wire::put_u32(out, 1);
        wire::put_u32(out, 1);
        wire::put_u32(out, 1);
        wire::put_f32(out, 1.0f);
        wire::put_f32(out, 2.0f);
    });
    CHECK_THROWS_AS(read_embeddings(p), LengthError);
}

TEST_CASE("BFVE header is little-endian with the documented layout")
{
    EmbeddingMatrix m;
    m.rows = Tensor::Constant(2, 3, 1.5);
    const auto p = temp_path("layout.bfve");
    write_embeddings(p, m);
    std::ifstream in(p, std::ios::binary);
    unsigned char h[16];
    in.read(reinterpret_cast<char*>(h), 16);
    CHECK(std::memcmp(h, "BFVE", 4) == 0);
    CHECK(h[4] == 1);
    CHECK(h[8] == 2);
    CHECK(h[12] == 3);
    float first = 0;
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    std::memcpy(&first, &bits, 4);
    CHECK(first == 1.5f);
}

TEST_CASE("BFVT round trip keeps tokens and vectors")
{
    TokenEmbeddingSet s;
    s.dim = 2;
    s.documents.push_back(doc({{1, 2}, {3, 4}}, {"héllo", "world"}));
    s.documents.push_back(doc({{5, 6}}, {""}));
    const auto p = temp_path("rt.bfvt");
    write_token_embeddings(p, s);
    const auto back = read_token_embeddings(p);
    REQUIRE(back.n() == 2);
    CHECK(back.dim == 2);
    CHECK(back.documents[0].tokens == s.documents[0].tokens);
    CHECK(back.documents[1].tokens == s.documents[1].tokens);
    CHECK(back.documents[0].vectors == s.documents[0].vectors);
    CHECK(back.documents[1].vectors == s.documents[1].vectors);
}

TEST_CASE("average_layers")
{
    EmbeddingMatrix a;
    a.rows = Tensor::Random(3, 4);
    EmbeddingMatrix b;
    b.rows = 3.0 * a.rows;
    CHECK(average_layers({a}, {0}).rows == a.rows);
    CHECK(average_layers({a, b}, {0, 1}).rows.isApprox(2.0 * a.rows, 1e-15));
    CHECK(average_layers({a, b}, {0, 1}).provenance.layers == std::vector<int>{0, 1});
    CHECK_THROWS_AS(average_layers({a, b}, {}), ContractError);
    CHECK_THROWS_AS(average_layers({a, b}, {2}), ContractError);
    EmbeddingMatrix c;
    c.rows = Tensor::Zero(3, 5);
    CHECK_THROWS_AS(average_layers({a, c}, {0, 1}), DimensionError);
    CHECK(default_layer_selection(7) == std::vector<int>{0, 1, 5});
    CHECK(default_layer_selection(3) == std::vector<int>{0, 1, 2});
}

TEST_CASE("mean and cls pooling")
{
    TokenEmbeddingSet s;
    s.dim = 2;
    s.documents.push_back(doc({{1, 0}, {0, 1}}, {"a", "b"}));
    s.documents.push_back(doc({{2, 3}}, {"c"}));
    s.documents.push_back(doc({{0.1f, 0.2f}, {0.3f, -0.5f}, {1.25f, 7}}, {"a", "b", "c"}));
    const auto m = mean_pool(s);
    CHECK(m.rows(0, 0) == 0.5);
    CHECK(m.rows(0, 1) == 0.5);
    CHECK(m.rows(1, 0) == 2.0);
    CHECK(m.rows(1, 1) == 3.0);
    for (Index j = 0; j < 2; ++j) {
        double sum = 0;
        for (Index t = 0; t < 3; ++t)
            sum += static_cast<double>(s.documents[2].vectors(t, j));
        CHECK(std::abs(m.rows(2, j) - sum / 3.0) < 1e-7);
    }
    const auto c = cls_pool(s);
    CHECK(c.rows(0, 0) == 1.0);
    CHECK(c.rows(2, 1) == doctest::Approx(0.2).epsilon(1e-6));

    s.documents.push_back(TokenDocument{Tensor32(0, 2), {}});
    CHECK_THROWS_AS(mean_pool(s), ContractError);
}

TEST_CASE("tf-idf pooling with identical weights equals mean pooling")
{
    TokenEmbeddingSet s;
    s.dim = 3;
    s.documents.push_back(doc({{1, 2, 3}, {4, 5, 6}, {-1, 0, 2}}, {"x", "y", "z"}));
    s.documents.push_back(doc({{1, 1, 1}, {2, 2, 2}, {3, 3, 3}}, {"x", "y", "z"}));
    const auto df = document_frequency(s);
    const auto t = tfidf_pool(s, df, s.n());
    const auto m = mean_pool(s);
    CHECK((t.rows - m.rows).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("tf-idf weights match an independent computation")
{
    const DocumentFrequency df = {{"the", 90}, {"flow", 3}, {"cat", 10}};
    const Index n = 100;
    const std::vector<std::string> toks = {"the", "flow"};
    const auto w = tfidf_weights(toks, df, n);

    const double idf_the = std::log(101.0 / 91.0) + 1.0;
    const double idf_flow = std::log(101.0 / 4.0) + 1.0;
    const double norm = std::hypot(idf_the, idf_flow);
    const double u0 = idf_the / norm, u1 = idf_flow / norm;
    double w0 = 0.1 * 0.5 + 0.9 * u0 / (u0 + u1);
    double w1 = 0.1 * 0.5 + 0.9 * u1 / (u0 + u1);
    const double z = w0 + w1;
    CHECK(std::abs(w(0) - w0 / z) < 1e-12);
    CHECK(std::abs(w(1) - w1 / z) < 1e-12);

    // Hand case with u = (0.8, 0.6) after normalization.
    const double h0 = 0.1 * 0.5 + 0.9 * 0.8 / 1.4;
    const double h1 = 0.1 * 0.5 + 0.9 * 0.6 / 1.4;
    CHECK(std::abs(h0 + h1 - 1.0) < 1e-12);
    CHECK(std::abs(h0 - (0.05 + 0.72 / 1.4)) < 1e-12);

    // Unseen tokens count as df = 0; weights stay a convex combination.
    const auto w2 = tfidf_weights({"unseen", "the", "the", "cat"}, df, n);
    CHECK(std::abs(w2.sum() - 1.0) < 1e-12);
    CHECK((w2.array() >= 0).all());
    CHECK(w2(1) == doctest::Approx(w2(2)).epsilon(1e-15));
    CHECK(w2(0) > w2(3));
}

TEST_CASE("tf-idf output stays in the convex hull of the token vectors")
{
    std::mt19937_64 rng(9);
    std::normal_distribution<float> dist;
    TokenEmbeddingSet s;
    s.dim = 2;
    const std::vector<std::string> vocab = {"a", "b", "c", "d"};
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    for (int i = 0; i < 20; ++i) {
        TokenDocument d;
        d.vectors.resize(4, 2);
        for (Index t = 0; t < 4; ++t) {
            d.vectors(t, 0) = dist(rng);
            d.vectors(t, 1) = dist(rng);
            d.tokens.push_back(vocab[pick(rng)]);
        }
        s.documents.push_back(d);
    }
    const auto df = document_frequency(s);
    const auto pooled = tfidf_pool(s, df, s.n());
    for (Index i = 0; i < s.n(); ++i) {
        const auto& v = s.documents[static_cast<std::size_t>(i)].vectors;
        // Bounding-box check per coordinate.
        for (Index j = 0; j < 2; ++j) {
            CHECK(pooled.rows(i, j) >= static_cast<double>(v.col(j).minCoeff()) - 1e-9);
            CHECK(pooled.rows(i, j) <= static_cast<double>(v.col(j).maxCoeff()) + 1e-9);
        }
        const auto w = tfidf_weights(s.documents[static_cast<std::size_t>(i)].tokens, df, s.n());
        CHECK((pooled.rows.row(i) - w.transpose() * v.cast<double>()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("filter_categories")
{
    Eigen::MatrixXi v = Eigen::MatrixXi::Zero(100, 3);
    v.col(0).head(31).setOnes();
    v.col(2).head(5).setOnes();
    auto kept = filter_categories(label_matrix(v));
    CHECK(kept.topics == std::vector<std::string>{"c0", "c2"});  // c2: 5% ≥ 1%
    CHECK(filter_categories(kept).topics == kept.topics);

    CategoryFilter drop;
    drop.drop_names = {"c2"};
    CHECK(filter_categories(label_matrix(v), drop).topics == std::vector<std::string>{"c0"});

    Eigen::MatrixXi big = Eigen::MatrixXi::Zero(10000, 2);
    big.col(0).head(50).setOnes();
    big.col(1).head(20).setOnes();
    CHECK(filter_categories(label_matrix(big)).topics == std::vector<std::string>{"c0"});

    CHECK_THROWS_AS(filter_categories(label_matrix(Eigen::MatrixXi::Zero(10, 2))), ContractError);
}

TEST_CASE("stratified split")
{
    std::mt19937_64 rng(4);
    std::bernoulli_distribution coin(0.3);
    Eigen::MatrixXi v(100, 3);
    for (Index i = 0; i < v.size(); ++i)
        v.data()[i] = coin(rng) ? 1 : 0;
    const auto labels = label_matrix(v);
    const auto s = stratified_split(labels, 0.2, 11);
    CHECK(s.test.size() == 20);
    CHECK(s.train.size() == 80);
    std::set<Index> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 100);
    for (Index j = 0; j < 3; ++j) {
        int count = 0, in_test = 0;
        for (Index i = 0; i < 100; ++i)
            count += v(i, j);
        for (Index i : s.test)
            in_test += v(i, j);
        CHECK(std::abs(in_test - std::lround(0.2 * count)) <= 1);
    }
    const auto again = stratified_split(labels, 0.2, 11);
    CHECK(again.test == s.test);
    CHECK(again.train == s.train);

    Eigen::MatrixXi single = Eigen::MatrixXi::Zero(100, 1);
    single.col(0).head(50).setOnes();
    const auto s1 = stratified_split(label_matrix(single), 0.2, 2);
    int pos = 0;
    for (Index i : s1.test)
        pos += single(i, 0);
    CHECK(pos == 10);

    CHECK_THROWS_AS(stratified_split(labels, 0.0, 1), ContractError);
    CHECK_THROWS_AS(stratified_split(labels, 1.0, 1), ContractError);
}

TEST_CASE("split warns about classes with fewer than two positives")
{
    std::vector<std::string> seen;
    set_warning_sink([&](const std::string& m) { seen.push_back(m); });
    Eigen::MatrixXi v = Eigen::MatrixXi::Zero(10, 2);
    v(0, 0) = 1;
    v.col(1).head(5).setOnes();
    stratified_split(label_matrix(v), 0.2, 1);
    set_warning_sink([](const std::string&) {});
    CHECK(seen.size() == 1);
}

TEST_CASE("label and table text format")
{
    Eigen::MatrixXi v(2, 2);
    v << 1, 0, 0, 1;
    auto labels = label_matrix(v);
    const auto p = temp_path("labels.csv");
    write_labels(p, labels, "provenance: test");
    {
        std::ifstream in(p);
        std::string first, second;
        std::getline(in, first);
        std::getline(in, second);
        CHECK(first == "# provenance: test");
        CHECK(second == "doc_id,c0,c1");
    }
    const auto back = read_labels(p);
    CHECK(back.values == v);
    CHECK(back.topics == labels.topics);
    CHECK(back.doc_ids == labels.doc_ids);

    NumericTable t{Tensor::Constant(1, 1, 0.1), {"a"}, {"x"}};
    const auto tp = temp_path("table.csv");
    write_table(tp, t);
    CHECK(read_table(tp).values(0, 0) == 0.1);

    write_raw(tp, [](std::ostream& out) { out << "doc_id,a\nx,2\n"; });
    CHECK_THROWS_AS(read_labels(tp), DataError);
    write_raw(tp, [](std::ostream& out) { out << "id,a\nx,1\n"; });
    CHECK_THROWS_AS(read_table(tp), FormatError);
    write_raw(tp, [](std::ostream& out) { out << "doc_id,a\nx,abc\n"; });
    CHECK_THROWS_AS(read_table(tp), FormatError);
}

TEST_CASE("seed spec parsing")
{
    const auto spec = parse_seed_spec("food: pizza, pasta, menu\nservice : waiter,staff\n\n");
    REQUIRE(spec.topics.size() == 2);
    CHECK(spec.topics[0].first == "food");
    CHECK(spec.topics[0].second == std::vector<std::string>{"pizza", "pasta", "menu"});
    CHECK(spec.topics[1].first == "service");
    CHECK(spec.topics[1].second == std::vector<std::string>{"waiter", "staff"});
    CHECK_THROWS_AS(parse_seed_spec("food pizza"), FormatError);
    CHECK_THROWS_AS(parse_seed_spec("food:"), FormatError);

    const auto p = temp_path("seeds.txt");
    write_seed_spec(p, spec);
    CHECK(read_seed_spec(p).topics == spec.topics);
}

#include "bfv/synth.hpp"

#include <cmath>
#include <random>

#include <Eigen/QR>

#include "bfv/errors.hpp"

namespace bfv::synth {

namespace {

constexpr Index kFillerVocabulary = 12;
constexpr Index kWordsPerTopic = 8;

Tensor gaussian(Index rows, Index cols, std::mt19937_64& rng)
{
    std::normal_distribution<double> dist(0.0, 1.0);
    Tensor t(rows, cols);
    // Row-major fill so the draw order is independent of storage order.
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            t(i, j) = dist(rng);
    return t;
}

Tensor orthonormal_columns(Index rows, Index cols, std::mt19937_64& rng)
{
    const Tensor g = gaussian(rows, cols, rng);
    Eigen::HouseholderQR<Tensor> qr(g);
    Tensor q = qr.householderQ() * Tensor::Identity(rows, cols);
    // Fix signs so Q does not depend on the QR implementation's convention.
    const Tensor r = qr.matrixQR().topLeftCorner(cols, cols);
    for (Index j = 0; j < cols; ++j)
        if (r(j, j) < 0.0)
            q.col(j) = -q.col(j);
    return q;
}

// Per-axis standard deviations with variance ratio `anisotropy` and
// geometric-mean standard deviation `scale`.
Eigen::VectorXd axis_scales(Index v, double scale, double anisotropy)
{
    Eigen::VectorXd s(v);
    for (Index k = 0; k < v; ++k) {
        const double t = v == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(v - 1);
        s(k) = scale * std::pow(anisotropy, 0.5 * (0.5 - t));
    }
    return s;
}

std::vector<std::string> doc_ids(Index n)
{
    std::vector<std::string> ids(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        ids[static_cast<std::size_t>(i)] = "d" + std::to_string(i);
    return ids;
}

std::vector<std::string> topic_names(Index m)
{
    std::vector<std::string> names(static_cast<std::size_t>(m));
    for (Index j = 0; j < m; ++j)
        names[static_cast<std::size_t>(j)] = "topic" + std::to_string(j);
    return names;
}

} // namespace

void validate(const SynthConfig& cfg)
{
    if (cfg.n < 1 || cfg.m < 1 || cfg.v < 1)
        throw ContractError("synth: sizes must be positive");
    if (cfg.v < cfg.m)
        throw ContractError("synth: V must be at least M");
    if (!(cfg.topic_prior > 0.0 && cfg.topic_prior < 1.0))
        throw ContractError("synth: topic_prior must lie in (0, 1)");
    if (!(cfg.noise_scale >= 0.0) || !std::isfinite(cfg.noise_scale))
        throw ContractError("synth: noise_scale must be non-negative");
    if (!(cfg.anisotropy >= 1.0) || !std::isfinite(cfg.anisotropy))
        throw ContractError("synth: anisotropy must be at least 1");
    for (double rate : {cfg.blur, cfg.flip, cfg.drop})
        if (!(rate >= 0.0 && rate <= 1.0))
            throw ContractError("synth: noise rates must lie in [0, 1]");
    if (cfg.tokens_per_doc < 0)
        throw ContractError("synth: tokens_per_doc must be non-negative");
}

SynthData generate(const SynthConfig& cfg)
{
    validate(cfg);
    // Independent streams so adding a component never perturbs the others.
    std::mt19937_64 geometry_rng(cfg.seed ^ 0x47454f4dULL);
    std::mt19937_64 label_rng(cfg.seed ^ 0x4c41424cULL);
    std::mt19937_64 noise_rng(cfg.seed ^ 0x4e4f4953ULL);
    std::mt19937_64 backend_rng(cfg.seed ^ 0x4241434bULL);
    std::mt19937_64 token_rng(cfg.seed ^ 0x544f4b4eULL);

    SynthData d;
    d.directions = orthonormal_columns(cfg.v, cfg.m, geometry_rng).transpose();
    const Tensor rotation = orthonormal_columns(cfg.v, cfg.v, geometry_rng);
    const Eigen::VectorXd scales = axis_scales(cfg.v, cfg.noise_scale, cfg.anisotropy);
    // noise = ε·diag(s)·Rᵀ has covariance R·diag(s²)·Rᵀ.
    const Tensor mixing = scales.asDiagonal() * rotation.transpose();

    std::bernoulli_distribution prior(cfg.topic_prior);
    Eigen::MatrixXi y(cfg.n, cfg.m);
    for (Index i = 0; i < cfg.n; ++i)
        for (Index j = 0; j < cfg.m; ++j)
            y(i, j) = prior(label_rng) ? 1 : 0;

    d.noise = gaussian(cfg.n, cfg.v, noise_rng) * mixing;
    const Tensor signal = y.cast<double>() * d.directions;

    d.embeddings.rows = signal + d.noise;
    d.labels.values = y;
    d.labels.topics = topic_names(cfg.m);
    d.labels.doc_ids = doc_ids(cfg.n);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::bernoulli_distribution flip(cfg.flip);
    std::bernoulli_distribution drop(cfg.drop);
    Tensor a(cfg.n, cfg.m), b(cfg.n, cfg.m);
    for (Index i = 0; i < cfg.n; ++i)
        for (Index j = 0; j < cfg.m; ++j) {
            const double yij = static_cast<double>(y(i, j));
            const double u = unit(backend_rng);
            a(i, j) = cfg.blur == 0.0 ? yij : (1.0 - cfg.blur) * yij + cfg.blur * u;
            int bij = flip(backend_rng) ? 1 - y(i, j) : y(i, j);
            if (drop(backend_rng))
                bij = 0;
            b(i, j) = static_cast<double>(bij);
        }
    d.backend_a = {a, d.labels.topics, d.labels.doc_ids, guidance::Source::zero_shot};
    d.backend_b = {b, d.labels.topics, d.labels.doc_ids, guidance::Source::seeded_topic};

    if (cfg.tokens_per_doc > 0) {
        // Topic words carry the document signal; filler words, drawn from a
        // small shared vocabulary, carry only noise.
        ingest::TokenEmbeddingSet set;
        set.dim = cfg.v;
        set.layer = 0;
        std::uniform_int_distribution<Index> filler(0, kFillerVocabulary - 1);
        std::uniform_int_distribution<Index> word(0, kWordsPerTopic - 1);
        const Index len = cfg.tokens_per_doc;
        for (Index i = 0; i < cfg.n; ++i) {
            std::vector<Index> active;
            for (Index j = 0; j < cfg.m; ++j)
                if (y(i, j) != 0)
                    active.push_back(j);
            const Tensor tok_noise = gaussian(len, cfg.v, token_rng) * mixing;
            ingest::TokenDocument doc;
            doc.vectors.resize(len, cfg.v);
            for (Index t = 0; t < len; ++t) {
                const bool topical = !active.empty() && t % 2 == 0;
                Eigen::RowVectorXd vec = tok_noise.row(t);
                if (topical) {
                    const Index j = active[static_cast<std::size_t>(t / 2) % active.size()];
                    doc.tokens.push_back("t" + std::to_string(j) + "_w" + std::to_string(word(token_rng)));
                    vec += signal.row(i);
                } else {
                    doc.tokens.push_back("f" + std::to_string(filler(token_rng)));
                }
                doc.vectors.row(t) = vec.cast<float>();
            }
            set.documents.push_back(std::move(doc));
        }
        d.tokens = std::move(set);
    }
    return d;
}

void write_dataset(const std::filesystem::path& dir, const SynthData& data, const std::string& comment)
{
    std::filesystem::create_directories(dir);
    ingest::write_embeddings(dir / "embeddings.bfve", data.embeddings);
    ingest::write_labels(dir / "labels.csv", data.labels, comment);
    guidance::write_guidance(dir / "guidance_a.csv", data.backend_a, comment);
    guidance::write_guidance(dir / "guidance_b.csv", data.backend_b, comment);
    if (data.tokens)
        ingest::write_token_embeddings(dir / "tokens.bfvt", *data.tokens);
}

} // namespace bfv::synth

#include "bfv/ingest/pooling.hpp"

#include <cmath>
#include <set>
#include <unordered_map>

#include "bfv/log.hpp"

namespace bfv::ingest {

namespace {

void require_tokens(const TokenEmbeddingSet& tokens)
{
    if (tokens.documents.empty())
        throw ContractError("token embedding set has no documents");
    for (std::size_t i = 0; i < tokens.documents.size(); ++i) {
        const auto& d = tokens.documents[i];
        if (d.vectors.rows() < 1)
            throw ContractError("document " + std::to_string(i) + " has no tokens");
        if (d.vectors.cols() != tokens.dim)
            throw DimensionError("document " + std::to_string(i) + " width differs from V");
        if (static_cast<Index>(d.tokens.size()) != d.vectors.rows())
            throw ContractError("document " + std::to_string(i) +
                                ": token strings do not align with vectors");
    }
}

EmbeddingMatrix pooled(const TokenEmbeddingSet& tokens, const std::string& how)
{
    EmbeddingMatrix m;
    m.rows.resize(tokens.n(), tokens.dim);
    m.provenance.layers = {tokens.layer};
    m.provenance.pooling = how;
    return m;
}

} // namespace

DocumentFrequency document_frequency(const TokenEmbeddingSet& tokens)
{
    DocumentFrequency df;
    for (const auto& d : tokens.documents) {
        std::set<std::string> seen(d.tokens.begin(), d.tokens.end());
        for (const auto& t : seen)
            ++df[t];
    }
    return df;
}

EmbeddingMatrix mean_pool(const TokenEmbeddingSet& tokens)
{
    require_tokens(tokens);
    EmbeddingMatrix m = pooled(tokens, "mean");
    for (Index i = 0; i < tokens.n(); ++i) {
        const auto& v = tokens.documents[static_cast<std::size_t>(i)].vectors;
        m.rows.row(i) = v.cast<double>().colwise().sum() / static_cast<double>(v.rows());
    }
    return m;
}

EmbeddingMatrix cls_pool(const TokenEmbeddingSet& tokens)
{
    require_tokens(tokens);
    EmbeddingMatrix m = pooled(tokens, "cls");
    for (Index i = 0; i < tokens.n(); ++i)
        m.rows.row(i) = tokens.documents[static_cast<std::size_t>(i)].vectors.row(0).cast<double>();
    return m;
}

Eigen::VectorXd tfidf_weights(const std::vector<std::string>& tokens, const DocumentFrequency& df,
                              Index corpus_size)
{
    const Index t = static_cast<Index>(tokens.size());
    if (t < 1)
        throw ContractError("tfidf_weights: empty document");

    std::unordered_map<std::string, Index> counts;
    for (const auto& tok : tokens)
        ++counts[tok];

    std::unordered_map<std::string, double> tfidf;
    double norm2 = 0.0;
    for (const auto& [tok, count] : counts) {
        auto it = df.find(tok);
        const double dfv = it == df.end() ? 0.0 : static_cast<double>(it->second);
        const double idf =
            std::log((1.0 + static_cast<double>(corpus_size)) / (1.0 + dfv)) + 1.0;
        const double w = static_cast<double>(count) * idf;
        tfidf[tok] = w;
        norm2 += w * w;
    }

    Eigen::VectorXd u(t);
    if (norm2 > 0.0) {
        const double norm = std::sqrt(norm2);
        for (Index j = 0; j < t; ++j) {
            const auto& tok = tokens[static_cast<std::size_t>(j)];
            u(j) = tfidf[tok] / norm / static_cast<double>(counts[tok]);
        }
    }
    const double total = norm2 > 0.0 ? u.sum() : 0.0;
    if (!(total > 0.0) || (u.array() < 0.0).any()) {
        warn("tf-idf weights degenerate for a document; falling back to mean pooling");
        return Eigen::VectorXd::Constant(t, 1.0 / static_cast<double>(t));
    }
    Eigen::VectorXd w = kMeanPoolShare / static_cast<double>(t) +
                        (1.0 - kMeanPoolShare) * (u.array() / total);
    return w / w.sum();
}

EmbeddingMatrix tfidf_pool(const TokenEmbeddingSet& tokens, const DocumentFrequency& df,
                           Index corpus_size)
{
    require_tokens(tokens);
    EmbeddingMatrix m = pooled(tokens, "tfidf");
    for (Index i = 0; i < tokens.n(); ++i) {
        const auto& d = tokens.documents[static_cast<std::size_t>(i)];
        const Eigen::VectorXd w = tfidf_weights(d.tokens, df, corpus_size);
        m.rows.row(i) = w.transpose() * d.vectors.cast<double>();
    }
    return m;
}

EmbeddingMatrix average_layers(const std::vector<EmbeddingMatrix>& layers,
                               const std::vector<int>& selection)
{
    if (selection.empty())
        throw ContractError("average_layers: empty layer selection");
    for (int s : selection)
        if (s < 0 || static_cast<std::size_t>(s) >= layers.size())
            throw ContractError("average_layers: layer index " + std::to_string(s) +
                                " out of range");
    const auto& first = layers[static_cast<std::size_t>(selection.front())];
    EmbeddingMatrix out;
    out.rows = Tensor::Zero(first.n(), first.dim());
    out.provenance = first.provenance;
    out.provenance.layers.clear();
    for (int s : selection) {
        const auto& l = layers[static_cast<std::size_t>(s)];
        if (l.n() != first.n() || l.dim() != first.dim())
            throw DimensionError("average_layers: layer " + std::to_string(s) + " is " +
                                 diff::shape_string(l.rows) + ", expected " +
                                 diff::shape_string(first.rows));
        out.rows += l.rows;
        out.provenance.layers.push_back(s);
    }
    out.rows /= static_cast<double>(selection.size());
    return out;
}

std::vector<int> default_layer_selection(std::size_t available)
{
    if (available == 7)
        return {0, 1, 5};
    std::vector<int> all(available);
    for (std::size_t i = 0; i < available; ++i)
        all[i] = static_cast<int>(i);
    return all;
}

} // namespace bfv::ingest

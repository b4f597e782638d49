#pragma once

#include <map>
#include <string>
#include <vector>

#include "bfv/ingest/formats.hpp"

namespace bfv::ingest {

inline constexpr double kMeanPoolShare = 0.1;  // share of uniform weights in tf-idf pooling

using DocumentFrequency = std::map<std::string, Index>;

// Number of documents containing each token string.
DocumentFrequency document_frequency(const TokenEmbeddingSet& tokens);

// Row i = unweighted mean of document i's token vectors.
EmbeddingMatrix mean_pool(const TokenEmbeddingSet& tokens);

// Row i = first token vector ([CLS]-style pooling).
EmbeddingMatrix cls_pool(const TokenEmbeddingSet& tokens);

// Per-token pooling weights for one document. Smooth idf
// ln((1+N)/(1+df)) + 1, tf = raw count, tf-idf vector L2-normalized over
// the document's distinct terms; a term's weight is shared equally by its
// occurrences. Final weights 0.1·(1/T) + 0.9·u_j/Σu, renormalized to sum 1.
// Returns uniform weights (and warns) when the tf-idf vector is all zero.
Eigen::VectorXd tfidf_weights(const std::vector<std::string>& tokens, const DocumentFrequency& df,
                              Index corpus_size);

EmbeddingMatrix tfidf_pool(const TokenEmbeddingSet& tokens, const DocumentFrequency& df,
                           Index corpus_size);

// Elementwise mean of the selected layers.
EmbeddingMatrix average_layers(const std::vector<EmbeddingMatrix>& layers,
                               const std::vector<int>& selection);

// {0, 1, 5}: embedding layer plus first and fifth transformer blocks when
// seven layers are available; otherwise every layer.
std::vector<int> default_layer_selection(std::size_t available);

} // namespace bfv::ingest

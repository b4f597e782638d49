#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "bfv/guidance.hpp"
#include "bfv/ingest/formats.hpp"

namespace bfv::synth {

using diff::Index;
using diff::Tensor;

struct SynthConfig {
    Index n = 2000;
    Index m = 4;
    Index v = 32;
    double topic_prior = 0.3;
    // Geometric mean of the per-axis noise standard deviations.
    double noise_scale = 0.2;
    // Largest / smallest noise covariance eigenvalue.
    double anisotropy = 1.0;
    // Backend A: (1 − blur)·y + blur·u with u ~ U(0, 1), dense soft scores.
    double blur = 0.0;
    // Backend B: hard 0/1 scores, y with each entry flipped at this rate...
    double flip = 0.0;
    // ...after which each remaining positive is dropped at this rate.
    double drop = 0.0;
    std::uint64_t seed = 0;
    // Token-level view for the pooling stages; 0 disables it.
    Index tokens_per_doc = 0;
};

void validate(const SynthConfig& cfg);

struct SynthData {
    ingest::EmbeddingMatrix embeddings;
    ingest::LabelMatrix labels;
    guidance::GuidanceMatrix backend_a;  // zero-shot-like
    guidance::GuidanceMatrix backend_b;  // seeded-topic-like
    Tensor directions;                   // M×V, orthonormal rows
    Tensor noise;                        // N×V noise component
    std::optional<ingest::TokenEmbeddingSet> tokens;
};

// embedding_i = Σ_j y_ij·direction_j + noise_i.
SynthData generate(const SynthConfig& cfg);

// Writes embeddings.bfve, labels.csv, guidance_a.csv, guidance_b.csv and,
// when present, tokens.bfvt into `dir`.
void write_dataset(const std::filesystem::path& dir, const SynthData& data,
                   const std::string& comment = {});

} // namespace bfv::synth

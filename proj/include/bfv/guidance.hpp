#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bfv/ingest/formats.hpp"

namespace bfv::guidance {

using diff::Index;
using diff::Tensor;

enum class Source { zero_shot, seeded_topic, mixed, ground_truth, unknown };

std::string to_string(Source s);

// N×M document-topic scores in [0, 1].
struct GuidanceMatrix {
    Tensor values;
    std::vector<std::string> topics;
    std::vector<std::string> doc_ids;
    Source source = Source::unknown;

    Index n() const { return values.rows(); }
    Index m() const { return values.cols(); }
};

inline constexpr double kDefaultOmega = 0.5;

// Per-column min-max scaling to [0, 1]; constant columns map to 0.5. With
// is_probability set, input already in [0, 1] passes through unchanged.
GuidanceMatrix scale_unit_interval(const ingest::NumericTable& raw, Source source,
                                   bool is_probability);
Tensor scale_unit_interval(const Tensor& raw);

// ω·t1 + (1 − ω)·t2, elementwise.
GuidanceMatrix combine(const GuidanceMatrix& t1, const GuidanceMatrix& t2,
                       double omega = kDefaultOmega);

// Throws ContractError when any entry lies outside [0, 1].
void require_unit_interval(const Tensor& values, const std::string& what);

GuidanceMatrix from_labels(const ingest::LabelMatrix& labels);
GuidanceMatrix read_guidance(const std::filesystem::path& path, Source source,
                             bool is_probability);
void write_guidance(const std::filesystem::path& path, const GuidanceMatrix& g,
                    const std::string& comment = {});
ingest::NumericTable to_table(const GuidanceMatrix& g);

// Columns reordered/subset to `topics`.
GuidanceMatrix select_topics(const GuidanceMatrix& g, const std::vector<std::string>& topics);
GuidanceMatrix take_rows(const GuidanceMatrix& g, const std::vector<Index>& rows);

} // namespace bfv::guidance

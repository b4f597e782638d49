#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "bfv/diffcore/tensor.hpp"

namespace bfv::ingest {

using diff::Index;
using diff::Tensor;
using diff::Tensor32;

// Describes how a sentence embedding matrix was produced.
struct Provenance {
    std::vector<int> layers;
    std::string pooling = "given";       // given | cls | mean | tfidf
    std::string calibration = "none";    // none | flow | whiten
};

// N×V sentence embeddings. Values are held in double precision but are
// 32-bit on disk.
struct EmbeddingMatrix {
    Tensor rows;
    Provenance provenance;

    Index n() const { return rows.rows(); }
    Index dim() const { return rows.cols(); }
};

struct TokenDocument {
    Tensor32 vectors;                  // T_i × V
    std::vector<std::string> tokens;   // T_i surface strings
};

struct TokenEmbeddingSet {
    std::vector<TokenDocument> documents;
    Index dim = 0;
    int layer = 0;

    Index n() const { return static_cast<Index>(documents.size()); }
};

// N×M binary ground truth with topic surface names.
struct LabelMatrix {
    Eigen::MatrixXi values;
    std::vector<std::string> topics;
    std::vector<std::string> doc_ids;

    Index n() const { return values.rows(); }
    Index m() const { return values.cols(); }
};

// Raw numeric table in the labels/guidance text format.
struct NumericTable {
    Tensor values;
    std::vector<std::string> topics;
    std::vector<std::string> doc_ids;
};

// Ordered topic surface name → seed words.
struct SeedSpec {
    std::vector<std::pair<std::string, std::vector<std::string>>> topics;
};

inline constexpr std::uint32_t kFormatVersion = 1;

// BFVE: "BFVE", u32 version, u32 N, u32 V, N·V f32 row-major, all LE.
void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

// BFVT: "BFVT", u32 version, u32 N, u32 V, N u32 token counts, then every
// token string as u32 byte length + UTF-8 bytes, then ΣT_i·V f32 payload.
void write_token_embeddings(const std::filesystem::path& path, const TokenEmbeddingSet& s);
TokenEmbeddingSet read_token_embeddings(const std::filesystem::path& path);

// Text tables: header `doc_id,<topic1>,...,<topicM>`, one row per document.
// Lines starting with '#' are provenance comments and are skipped on read.
NumericTable read_table(const std::filesystem::path& path);
void write_table(const std::filesystem::path& path, const NumericTable& table,
                 const std::string& comment = {});
void write_table(std::ostream& out, const NumericTable& table, const std::string& comment = {});

LabelMatrix read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const LabelMatrix& labels,
                  const std::string& comment = {});
LabelMatrix labels_from_table(const NumericTable& table);

// `<surface name>: w1, w2, ...` per line.
SeedSpec read_seed_spec(const std::filesystem::path& path);
void write_seed_spec(const std::filesystem::path& path, const SeedSpec& spec);
SeedSpec parse_seed_spec(const std::string& text);

// Little-endian primitives shared by every binary format in the project.
namespace wire {
void put_u32(std::ostream& out, std::uint32_t v);
void put_f32(std::ostream& out, float v);
void put_magic(std::ostream& out, const char (&magic)[5]);
std::uint32_t get_u32(std::istream& in, const std::string& what);
float get_f32(std::istream& in, const std::string& what);
void expect_magic(std::istream& in, const char (&magic)[5]);
void put_matrix(std::ostream& out, const Tensor& m);   // row-major f32
Tensor get_matrix(std::istream& in, Index rows, Index cols, const std::string& what);
void expect_eof(std::istream& in, const std::string& what);
} // namespace wire

} // namespace bfv::ingest

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bfv::metrics {

using Index = Eigen::Index;
using BinaryMatrix = Eigen::MatrixXi;

// Example-based scores, averaged over rows. An example whose gold and
// predicted sets are both empty counts as an exact match (1 for ACC, HS and
// F1); an empty predicted set contributes precision 0, an empty gold set
// recall 0.
struct ExampleScores {
    double acc = 0.0;
    double hamming_score = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

ExampleScores example_metrics(const BinaryMatrix& gold, const BinaryMatrix& pred);

// Per-class binary precision/recall/F1 (0 when undefined), unweighted mean.
struct MacroScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

MacroScores macro_prf(const BinaryMatrix& gold, const BinaryMatrix& pred);

// Step-wise average precision Σ (R_n − R_{n−1})·P_n over scores sorted in
// descending order; ties keep input order. nullopt without positives.
std::optional<double> average_precision(const Eigen::VectorXi& gold, const Eigen::VectorXd& scores);

// Mann–Whitney form with midranks. nullopt unless both classes are present.
std::optional<double> roc_auc(const Eigen::VectorXi& gold, const Eigen::VectorXd& scores);

// Macro means over classes; classes where the per-class score is undefined
// are skipped with a warning. nullopt when every class is skipped.
std::optional<double> macro_average_precision(const BinaryMatrix& gold, const Eigen::MatrixXd& scores);
std::optional<double> macro_roc_auc(const BinaryMatrix& gold, const Eigen::MatrixXd& scores);

// Mean over examples with non-empty gold of apk over the top-k topics.
std::optional<double> map_at_k(const BinaryMatrix& gold, const Eigen::MatrixXd& scores, Index k = 3);
// apk for one example; `ranked` lists topic ids best first.
double apk(const std::vector<Index>& actual, const std::vector<Index>& ranked, Index k);

struct ClusteringScores {
    double homogeneity = 0.0;
    double completeness = 0.0;
    double nmi = 0.0;  // v-measure
    double adjusted_mi = 0.0;
    double adjusted_rand = 0.0;
};

ClusteringScores clustering_metrics(const std::vector<int>& gold, const std::vector<int>& pred);

// Expected mutual information of two labelings under the permutation
// (hypergeometric) model, from the marginals of the contingency table.
double expected_mutual_information(const std::vector<Index>& row_sums,
                                   const std::vector<Index>& col_sums);

struct MetricsReport {
    ExampleScores example;
    MacroScores macro;
    std::optional<double> aps;
    std::optional<double> auc;
    std::optional<double> p_at_3;
    std::optional<ClusteringScores> clustering;  // over single-label examples
    Index examples = 0;
    Index clustering_examples = 0;
};

// Clustering scores use the examples with exactly one gold label; the
// predicted cluster is the arg-max probability.
MetricsReport evaluate(const BinaryMatrix& gold, const Eigen::MatrixXd& probabilities,
                       const BinaryMatrix& binary);

// Ordered (name, value) pairs; absent values are nullopt.
std::vector<std::pair<std::string, std::optional<double>>> report_entries(const MetricsReport& r);

// `name = value` per line with six decimals ("n/a" for absent values).
void write_report_text(std::ostream& out, const MetricsReport& r, const std::string& comment = {});
void write_report_text(const std::filesystem::path& path, const MetricsReport& r,
                       const std::string& comment = {});
// JSON object with the same keys (null for absent values).
std::string report_json(const MetricsReport& r, const std::string& provenance = {});
void write_report_json(const std::filesystem::path& path, const MetricsReport& r,
                       const std::string& provenance = {});

} // namespace bfv::metrics

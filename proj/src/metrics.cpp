#include "bfv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "bfv/errors.hpp"
#include "bfv/log.hpp"

namespace bfv::metrics {

namespace {

void require_same_shape(const BinaryMatrix& gold, const BinaryMatrix& pred, const char* what)
{
    if (gold.rows() != pred.rows() || gold.cols() != pred.cols())
        throw ContractError(std::string(what) + ": gold and prediction shapes differ");
}

void require_same_shape(const BinaryMatrix& gold, const Eigen::MatrixXd& scores, const char* what)
{
    if (gold.rows() != scores.rows() || gold.cols() != scores.cols())
        throw ContractError(std::string(what) + ": gold and score shapes differ");
}

// Positions sorted by descending score, ties in input order.
std::vector<Index> descending_order(const Eigen::VectorXd& scores)
{
    std::vector<Index> order(static_cast<std::size_t>(scores.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return scores(a) > scores(b); });
    return order;
}

double entropy(const std::vector<Index>& counts, double n)
{
    double h = 0.0;
    for (Index c : counts)
        if (c > 0) {
            const double p = static_cast<double>(c) / n;
            h -= p * std::log(p);
        }
    return h;
}

double choose2(Index k)
{
    return static_cast<double>(k) * static_cast<double>(k - 1) / 2.0;
}

struct Contingency {
    std::vector<std::vector<Index>> table;  // classes × clusters
    std::vector<Index> rows;
    std::vector<Index> cols;
    double n = 0.0;
};

Contingency contingency(const std::vector<int>& gold, const std::vector<int>& pred)
{
    std::map<int, std::size_t> gi, pi;
    for (int g : gold)
        gi.emplace(g, 0);
    for (int p : pred)
        pi.emplace(p, 0);
    std::size_t k = 0;
    for (auto& [_, idx] : gi)
        idx = k++;
    k = 0;
    for (auto& [_, idx] : pi)
        idx = k++;
    Contingency c;
    c.table.assign(gi.size(), std::vector<Index>(pi.size(), 0));
    c.rows.assign(gi.size(), 0);
    c.cols.assign(pi.size(), 0);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const auto r = gi[gold[i]];
        const auto col = pi[pred[i]];
        ++c.table[r][col];
        ++c.rows[r];
        ++c.cols[col];
    }
    c.n = static_cast<double>(gold.size());
    return c;
}

double mutual_information(const Contingency& c)
{
    double mi = 0.0;
    for (std::size_t i = 0; i < c.rows.size(); ++i)
        for (std::size_t j = 0; j < c.cols.size(); ++j) {
            const Index nij = c.table[i][j];
            if (nij == 0)
                continue;
            const double v = static_cast<double>(nij);
            mi += v / c.n *
                  std::log(c.n * v / (static_cast<double>(c.rows[i]) * static_cast<double>(c.cols[j])));
        }
    return std::max(mi, 0.0);
}

} // namespace

ExampleScores example_metrics(const BinaryMatrix& gold, const BinaryMatrix& pred)
{
    require_same_shape(gold, pred, "example_metrics");
    ExampleScores s;
    const Index n = gold.rows();
    if (n == 0)
        return s;
    for (Index i = 0; i < n; ++i) {
        Index inter = 0, g = 0, p = 0;
        for (Index j = 0; j < gold.cols(); ++j) {
            const bool gj = gold(i, j) != 0;
            const bool pj = pred(i, j) != 0;
            inter += gj && pj;
            g += gj;
            p += pj;
        }
        const Index uni = g + p - inter;
        const bool both_empty = g == 0 && p == 0;
        s.acc += inter == g && inter == p ? 1.0 : 0.0;
        s.hamming_score += both_empty ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
        s.precision += p == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(p);
        s.recall += g == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(g);
        s.f1 += both_empty ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(g + p);
    }
    const double dn = static_cast<double>(n);
    s.acc /= dn;
    s.hamming_score /= dn;
    s.precision /= dn;
    s.recall /= dn;
    s.f1 /= dn;
    return s;
}

MacroScores macro_prf(const BinaryMatrix& gold, const BinaryMatrix& pred)
{
    require_same_shape(gold, pred, "macro_prf");
    MacroScores s;
    const Index m = gold.cols();
    if (m == 0)
        return s;
    for (Index j = 0; j < m; ++j) {
        Index tp = 0, fp = 0, fn = 0;
        for (Index i = 0; i < gold.rows(); ++i) {
            const bool g = gold(i, j) != 0;
            const bool p = pred(i, j) != 0;
            tp += g && p;
            fp += !g && p;
            fn += g && !p;
        }
        if (tp + fn == 0 && tp + fp == 0)
            warn("macro_prf: class " + std::to_string(j) +
                 " has no gold or predicted positives; scored (0, 0, 0)");
        const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        const double f1 = 2 * tp + fp + fn == 0
                              ? 0.0
                              : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
        s.precision += precision;
        s.recall += recall;
        s.f1 += f1;
    }
    const double dm = static_cast<double>(m);
    s.precision /= dm;
    s.recall /= dm;
    s.f1 /= dm;
    return s;
}

std::optional<double> average_precision(const Eigen::VectorXi& gold, const Eigen::VectorXd& scores)
{
    if (gold.size() != scores.size())
        throw ContractError("average_precision: size mismatch");
    const Index positives = (gold.array() != 0).count();
    if (positives == 0)
        return std::nullopt;
    double ap = 0.0;
    Index hits = 0;
    Index seen = 0;
    for (Index idx : descending_order(scores)) {
        ++seen;
        if (gold(idx) != 0) {
            ++hits;
            // Recall rises by 1/P at each positive.
            ap += static_cast<double>(hits) / static_cast<double>(seen);
        }
    }
    return ap / static_cast<double>(positives);
}

std::optional<double> roc_auc(const Eigen::VectorXi& gold, const Eigen::VectorXd& scores)
{
    if (gold.size() != scores.size())
        throw ContractError("roc_auc: size mismatch");
    const Index n = gold.size();
    const Index pos = (gold.array() != 0).count();
    const Index neg = n - pos;
    if (pos == 0 || neg == 0)
        return std::nullopt;
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) < scores(b); });
    double rank_sum = 0.0;
    for (Index i = 0; i < n;) {
        Index j = i;
        while (j + 1 < n && scores(order[j + 1]) == scores(order[i]))
            ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (Index k = i; k <= j; ++k)
            if (gold(order[k]) != 0)
                rank_sum += midrank;
        i = j + 1;
    }
    const double p = static_cast<double>(pos);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

std::optional<double> macro_average_precision(const BinaryMatrix& gold, const Eigen::MatrixXd& scores)
{
    require_same_shape(gold, scores, "macro_average_precision");
    double sum = 0.0;
    Index used = 0;
    for (Index j = 0; j < gold.cols(); ++j) {
        auto ap = average_precision(gold.col(j), scores.col(j));
        if (!ap) {
            warn("average precision: class " + std::to_string(j) + " has no positives; skipped");
            continue;
        }
        sum += *ap;
        ++used;
    }
    if (used == 0)
        return std::nullopt;
    return sum / static_cast<double>(used);
}

std::optional<double> macro_roc_auc(const BinaryMatrix& gold, const Eigen::MatrixXd& scores)
{
    require_same_shape(gold, scores, "macro_roc_auc");
    double sum = 0.0;
    Index used = 0;
    for (Index j = 0; j < gold.cols(); ++j) {
        auto auc = roc_auc(gold.col(j), scores.col(j));
        if (!auc) {
            warn("roc auc: class " + std::to_string(j) + " is single-class; skipped");
            continue;
        }
        sum += *auc;
        ++used;
    }
    if (used == 0)
        return std::nullopt;
    return sum / static_cast<double>(used);
}

double apk(const std::vector<Index>& actual, const std::vector<Index>& ranked, Index k)
{
    if (k < 1)
        throw ContractError("apk: k must be at least 1");
    if (actual.empty())
        return 0.0;
    const std::size_t limit = std::min(ranked.size(), static_cast<std::size_t>(k));
    double score = 0.0;
    double hits = 0.0;
    for (std::size_t i = 0; i < limit; ++i) {
        const bool relevant = std::find(actual.begin(), actual.end(), ranked[i]) != actual.end();
        const bool repeated = std::find(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(i),
                                        ranked[i]) != ranked.begin() + static_cast<std::ptrdiff_t>(i);
        if (relevant && !repeated) {
            hits += 1.0;
            score += hits / static_cast<double>(i + 1);
        }
    }
    return score / static_cast<double>(std::min<std::size_t>(actual.size(), static_cast<std::size_t>(k)));
}

std::optional<double> map_at_k(const BinaryMatrix& gold, const Eigen::MatrixXd& scores, Index k)
{
    require_same_shape(gold, scores, "map_at_k");
    if (k < 1)
        throw ContractError("map_at_k: k must be at least 1");
    double sum = 0.0;
    Index used = 0;
    for (Index i = 0; i < gold.rows(); ++i) {
        std::vector<Index> actual;
        for (Index j = 0; j < gold.cols(); ++j)
            if (gold(i, j) != 0)
                actual.push_back(j);
        if (actual.empty())
            continue;
        const Eigen::VectorXd row = scores.row(i).transpose();
        sum += apk(actual, descending_order(row), k);
        ++used;
    }
    if (used == 0)
        return std::nullopt;
    return sum / static_cast<double>(used);
}

double expected_mutual_information(const std::vector<Index>& row_sums,
                                   const std::vector<Index>& col_sums)
{
    const Index n = std::accumulate(row_sums.begin(), row_sums.end(), Index{0});
    const double dn = static_cast<double>(n);
    const double lg_n = std::lgamma(dn + 1.0);
    double emi = 0.0;
    for (Index a : row_sums) {
        for (Index b : col_sums) {
            const Index lo = std::max<Index>(1, a + b - n);
            const Index hi = std::min(a, b);
            const double lg_fixed = std::lgamma(static_cast<double>(a) + 1.0) +
                                    std::lgamma(static_cast<double>(b) + 1.0) +
                                    std::lgamma(static_cast<double>(n - a) + 1.0) +
                                    std::lgamma(static_cast<double>(n - b) + 1.0) - lg_n;
            for (Index nij = lo; nij <= hi; ++nij) {
                const double v = static_cast<double>(nij);
                const double term = v / dn *
                                    std::log(dn * v / (static_cast<double>(a) * static_cast<double>(b)));
                const double lg_prob = lg_fixed - std::lgamma(v + 1.0) -
                                       std::lgamma(static_cast<double>(a - nij) + 1.0) -
                                       std::lgamma(static_cast<double>(b - nij) + 1.0) -
                                       std::lgamma(static_cast<double>(n - a - b + nij) + 1.0);
                emi += term * std::exp(lg_prob);
            }
        }
    }
    return emi;
}

ClusteringScores clustering_metrics(const std::vector<int>& gold, const std::vector<int>& pred)
{
    if (gold.size() != pred.size())
        throw ContractError("clustering_metrics: size mismatch");
    if (gold.size() < 2)
        throw ContractError("clustering_metrics: need at least two examples");
    const Contingency c = contingency(gold, pred);
    ClusteringScores s;

    if (c.rows.size() == 1 && c.cols.size() == 1) {
        s = {1.0, 1.0, 1.0, 1.0, 1.0};
        return s;
    }

    const double h_c = entropy(c.rows, c.n);
    const double h_k = entropy(c.cols, c.n);
    const double mi = mutual_information(c);
    // H(C|K) = H(C) − MI, H(K|C) = H(K) − MI.
    s.homogeneity = h_c == 0.0 ? 1.0 : std::clamp(mi / h_c, 0.0, 1.0);
    s.completeness = h_k == 0.0 ? 1.0 : std::clamp(mi / h_k, 0.0, 1.0);
    s.nmi = s.homogeneity + s.completeness == 0.0
                ? 0.0
                : 2.0 * s.homogeneity * s.completeness / (s.homogeneity + s.completeness);

    // Adjusted Rand from pair counts.
    double sum_comb = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& row : c.table)
        for (Index v : row)
            sum_comb += choose2(v);
    for (Index a : c.rows)
        sum_a += choose2(a);
    for (Index b : c.cols)
        sum_b += choose2(b);
    const double pairs = choose2(static_cast<Index>(c.n));
    const double expected = sum_a * sum_b / pairs;
    const double max_index = 0.5 * (sum_a + sum_b);
    s.adjusted_rand = max_index == expected ? 1.0 : (sum_comb - expected) / (max_index - expected);

    // Adjusted MI with arithmetic-mean normalization.
    const double emi = expected_mutual_information(c.rows, c.cols);
    // EMI ≤ min(H) ≤ mean(H), with equality only when both labelings are
    // all-singleton partitions; that identical pair scores 1 as for ARI.
    const double denom = 0.5 * (h_c + h_k) - emi;
    s.adjusted_mi = denom <= 1e-12 ? 1.0 : (mi - emi) / denom;
    return s;
}

MetricsReport evaluate(const BinaryMatrix& gold, const Eigen::MatrixXd& probabilities,
                       const BinaryMatrix& binary)
{
    require_same_shape(gold, binary, "evaluate");
    require_same_shape(gold, probabilities, "evaluate");
    MetricsReport r;
    r.examples = gold.rows();
    r.example = example_metrics(gold, binary);
    r.macro = macro_prf(gold, binary);
    r.aps = macro_average_precision(gold, probabilities);
    r.auc = macro_roc_auc(gold, probabilities);
    r.p_at_3 = map_at_k(gold, probabilities, 3);

    std::vector<int> g, p;
    for (Index i = 0; i < gold.rows(); ++i) {
        if (gold.row(i).sum() != 1)
            continue;
        Index gi = 0, pi = 0;
        gold.row(i).maxCoeff(&gi);
        probabilities.row(i).maxCoeff(&pi);
        g.push_back(static_cast<int>(gi));
        p.push_back(static_cast<int>(pi));
    }
    r.clustering_examples = static_cast<Index>(g.size());
    if (g.size() >= 2)
        r.clustering = clustering_metrics(g, p);
    return r;
}

std::vector<std::pair<std::string, std::optional<double>>> report_entries(const MetricsReport& r)
{
    std::vector<std::pair<std::string, std::optional<double>>> e = {
        {"acc", r.example.acc},
        {"hamming_score", r.example.hamming_score},
        {"precision", r.example.precision},
        {"recall", r.example.recall},
        {"f1", r.example.f1},
        {"macro_precision", r.macro.precision},
        {"macro_recall", r.macro.recall},
        {"macro_f1", r.macro.f1},
        {"aps", r.aps},
        {"auc", r.auc},
        {"p_at_3", r.p_at_3},
    };
    auto cl = [&](double ClusteringScores::*field) -> std::optional<double> {
        if (!r.clustering)
            return std::nullopt;
        return (*r.clustering).*field;
    };
    e.emplace_back("homogeneity", cl(&ClusteringScores::homogeneity));
    e.emplace_back("completeness", cl(&ClusteringScores::completeness));
    e.emplace_back("nmi", cl(&ClusteringScores::nmi));
    e.emplace_back("adjusted_mi", cl(&ClusteringScores::adjusted_mi));
    e.emplace_back("adjusted_rand", cl(&ClusteringScores::adjusted_rand));
    return e;
}

void write_report_text(std::ostream& out, const MetricsReport& r, const std::string& comment)
{
    if (!comment.empty())
        out << "# " << comment << '\n';
    char buf[64];
    for (const auto& [name, value] : report_entries(r)) {
        if (value)
            std::snprintf(buf, sizeof(buf), "%.6f", *value);
        else
            std::snprintf(buf, sizeof(buf), "n/a");
        out << name << " = " << buf << '\n';
    }
    out << "examples = " << r.examples << '\n';
    out << "clustering_examples = " << r.clustering_examples << '\n';
}

void write_report_text(const std::filesystem::path& path, const MetricsReport& r,
                       const std::string& comment)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot open for writing: " + path.string());
    write_report_text(out, r, comment);
}

std::string report_json(const MetricsReport& r, const std::string& provenance)
{
    nlohmann::ordered_json j;
    if (!provenance.empty())
        j["provenance"] = provenance;
    for (const auto& [name, value] : report_entries(r))
        j[name] = value ? nlohmann::ordered_json(*value) : nlohmann::ordered_json(nullptr);
    j["examples"] = r.examples;
    j["clustering_examples"] = r.clustering_examples;
    return j.dump(2) + "\n";
}

void write_report_json(const std::filesystem::path& path, const MetricsReport& r,
                       const std::string& provenance)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot open for writing: " + path.string());
    out << report_json(r, provenance);
}

} // namespace bfv::metrics

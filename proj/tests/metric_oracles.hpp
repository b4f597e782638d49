#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include "bfv/metrics.hpp"

// Definitional oracles shared by the metric tests and the acceptance run.
namespace bfv::oracle {

using metrics::Index;
using metrics::ClusteringScores;
using metrics::ExampleScores;
using metrics::MacroScores;

inline Eigen::MatrixXi decode(unsigned bits, Index n, Index m)
{
    Eigen::MatrixXi out(n, m);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < m; ++j)
            out(i, j) = (bits >> (i * m + j)) & 1U;
    return out;
}

inline std::set<Index> row_set(const Eigen::MatrixXi& x, Index i)
{
    std::set<Index> s;
    for (Index j = 0; j < x.cols(); ++j)
        if (x(i, j))
            s.insert(j);
    return s;
}

// Set formulas with the empty-set conventions spelled out.
inline ExampleScores example_oracle(const Eigen::MatrixXi& y, const Eigen::MatrixXi& yhat)
{
    ExampleScores s;
    const Index n = y.rows();
    for (Index i = 0; i < n; ++i) {
        const auto a = row_set(y, i);
        const auto b = row_set(yhat, i);
        std::set<Index> inter, uni;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(inter, inter.end()));
        std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::inserter(uni, uni.end()));
        const double ni = static_cast<double>(inter.size());
        s.acc += a == b ? 1.0 : 0.0;
        s.hamming_score += uni.empty() ? 1.0 : ni / static_cast<double>(uni.size());
        s.precision += b.empty() ? 0.0 : ni / static_cast<double>(b.size());
        s.recall += a.empty() ? 0.0 : ni / static_cast<double>(a.size());
        s.f1 += a.empty() && b.empty() ? 1.0 : 2.0 * ni / static_cast<double>(a.size() + b.size());
    }
    s.acc /= static_cast<double>(n);
    s.hamming_score /= static_cast<double>(n);
    s.precision /= static_cast<double>(n);
    s.recall /= static_cast<double>(n);
    s.f1 /= static_cast<double>(n);
    return s;
}

inline MacroScores macro_oracle(const Eigen::MatrixXi& y, const Eigen::MatrixXi& yhat)
{
    MacroScores s;
    for (Index j = 0; j < y.cols(); ++j) {
        double tp = 0, fp = 0, fn = 0;
        for (Index i = 0; i < y.rows(); ++i) {
            if (y(i, j) && yhat(i, j)) tp += 1;
            if (!y(i, j) && yhat(i, j)) fp += 1;
            if (y(i, j) && !yhat(i, j)) fn += 1;
        }
        const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
        const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
        s.precision += p;
        s.recall += r;
        s.f1 += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    }
    const double m = static_cast<double>(y.cols());
    s.precision /= m;
    s.recall /= m;
    s.f1 /= m;
    return s;
}

// Rank of item k: items with a strictly higher score, plus tied items that
// come earlier in input order.
inline Index stable_rank(const Eigen::VectorXd& s, Index k)
{
    Index r = 1;
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > s(k) || (s(i) == s(k) && i < k))
            ++r;
    return r;
}

inline std::optional<double> ap_oracle(const Eigen::VectorXi& g, const Eigen::VectorXd& s)
{
    double total = 0.0;
    int positives = 0;
    for (Index k = 0; k < g.size(); ++k) {
        if (!g(k))
            continue;
        ++positives;
        const Index rk = stable_rank(s, k);
        int hits = 0;
        for (Index i = 0; i < g.size(); ++i)
            if (g(i) && stable_rank(s, i) <= rk)
                ++hits;
        total += static_cast<double>(hits) / static_cast<double>(rk);
    }
    if (positives == 0)
        return std::nullopt;
    return total / positives;
}

inline std::optional<double> auc_oracle(const Eigen::VectorXi& g, const Eigen::VectorXd& s)
{
    double wins = 0.0, pairs = 0.0;
    for (Index a = 0; a < g.size(); ++a)
        for (Index b = 0; b < g.size(); ++b)
            if (g(a) && !g(b)) {
                pairs += 1;
                wins += s(a) > s(b) ? 1.0 : s(a) == s(b) ? 0.5 : 0.0;
            }
    if (pairs == 0)
        return std::nullopt;
    return wins / pairs;
}

// Reference apk: walk the ranked list, count first hits only.
inline double apk_oracle(const std::vector<Index>& actual, const std::vector<Index>& predicted, Index k)
{
    std::vector<Index> p(predicted.begin(), predicted.begin() + std::min<std::size_t>(predicted.size(), k));
    double score = 0.0, hits = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool in_actual = std::count(actual.begin(), actual.end(), p[i]) > 0;
        const bool seen = std::count(p.begin(), p.begin() + static_cast<long>(i), p[i]) > 0;
        if (in_actual && !seen) {
            hits += 1.0;
            score += hits / (static_cast<double>(i) + 1.0);
        }
    }
    if (actual.empty())
        return 0.0;
    return score / static_cast<double>(std::min<std::size_t>(actual.size(), k));
}

inline double entropy_of(const std::vector<int>& x)
{
    std::map<int, double> c;
    for (int v : x)
        c[v] += 1;
    double h = 0.0;
    for (auto& [_, n] : c)
        h -= n / x.size() * std::log(n / x.size());
    return h;
}

// H(A | B) from the joint and marginal counts.
inline double conditional_entropy(const std::vector<int>& a, const std::vector<int>& b)
{
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> mb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1;
        mb[b[i]] += 1;
    }
    const double n = static_cast<double>(a.size());
    double h = 0.0;
    for (auto& [key, v] : joint)
        h -= v / n * std::log(v / mb[key.second]);
    return h;
}

inline double mi_of(const std::vector<int>& a, const std::vector<int>& b)
{
    return entropy_of(a) - conditional_entropy(a, b);
}

inline double rand_index(const std::vector<int>& a, const std::vector<int>& b)
{
    double agree = 0, pairs = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            pairs += 1;
            agree += (a[i] == a[j]) == (b[i] == b[j]) ? 1 : 0;
        }
    return agree / pairs;
}

// Expectations under the permutation model by averaging over every
// permutation of the predicted labels.
inline ClusteringScores clustering_oracle(const std::vector<int>& a, const std::vector<int>& b)
{
    ClusteringScores s;
    const double ha = entropy_of(a), hb = entropy_of(b);
    const bool trivial = std::set<int>(a.begin(), a.end()).size() == 1 &&
                         std::set<int>(b.begin(), b.end()).size() == 1;
    if (trivial)
        return {1, 1, 1, 1, 1};
    s.homogeneity = ha == 0 ? 1.0 : 1.0 - conditional_entropy(a, b) / ha;
    s.completeness = hb == 0 ? 1.0 : 1.0 - conditional_entropy(b, a) / hb;
    s.nmi = s.homogeneity + s.completeness == 0
                ? 0.0
                : 2 * s.homogeneity * s.completeness / (s.homogeneity + s.completeness);

    std::vector<int> perm = b;
    std::sort(perm.begin(), perm.end());
    double sum_mi = 0, sum_ri = 0, count = 0;
    std::vector<std::size_t> idx(b.size());
    std::iota(idx.begin(), idx.end(), 0);
    do {
        std::vector<int> pb(b.size());
        for (std::size_t i = 0; i < b.size(); ++i)
            pb[i] = b[idx[i]];
        sum_mi += mi_of(a, pb);
        sum_ri += rand_index(a, pb);
        count += 1;
    } while (std::next_permutation(idx.begin(), idx.end()));
    const double emi = sum_mi / count;
    const double eri = sum_ri / count;
    const double mi = mi_of(a, b);
    const double ri = rand_index(a, b);
    s.adjusted_rand = std::abs(1.0 - eri) < 1e-12 ? 1.0 : (ri - eri) / (1.0 - eri);
    const double denom = 0.5 * (ha + hb) - emi;
    s.adjusted_mi = denom <= 1e-12 ? 1.0 : (mi - emi) / denom;
    return s;
}

} // namespace bfv::oracle

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bfv/ingest/formats.hpp"

namespace bfv::ingest {

struct CategoryFilter {
    Index min_count = 30;
    double min_fraction = 0.01;
    std::vector<std::string> drop_names;
};

// Column indices kept by the filter: count ≥ min_count OR fraction ≥
// min_fraction, minus any column named in drop_names.
std::vector<Index> select_categories(const LabelMatrix& labels, const CategoryFilter& filter);

LabelMatrix filter_categories(const LabelMatrix& labels, const CategoryFilter& filter = {});

// Keeps the given columns of a table, in order.
NumericTable select_columns(const NumericTable& table, const std::vector<std::string>& topics);

struct Split {
    std::vector<Index> train;
    std::vector<Index> test;
};

// Greedy iterative stratification into two folds. |test| = round(f·N);
// per-class test positives track round(f·count). Deterministic in seed.
Split stratified_split(const LabelMatrix& labels, double test_fraction, std::uint64_t seed);

// Rows of m at the given indices.
template <typename Derived>
auto take_rows(const Eigen::MatrixBase<Derived>& m, const std::vector<Index>& rows)
{
    using Plain = typename Derived::PlainObject;
    Plain out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Index>(i)) = m.row(rows[i]);
    return out;
}

LabelMatrix take_rows(const LabelMatrix& labels, const std::vector<Index>& rows);

} // namespace bfv::ingest

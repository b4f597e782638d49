#include "bfv/ingest/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bfv/log.hpp"

namespace bfv::ingest {

std::vector<Index> select_categories(const LabelMatrix& labels, const CategoryFilter& filter)
{
    if (filter.min_count < 0 || filter.min_fraction < 0.0)
        throw ContractError("filter thresholds must be non-negative");
    const double n = static_cast<double>(labels.n());
    std::vector<Index> keep;
    for (Index c = 0; c < labels.m(); ++c) {
        const auto& name = labels.topics[static_cast<std::size_t>(c)];
        if (std::find(filter.drop_names.begin(), filter.drop_names.end(), name) !=
            filter.drop_names.end())
            continue;
        const Index count = labels.values.col(c).sum();
        const bool by_count = count >= filter.min_count;
        const bool by_fraction = n > 0 && static_cast<double>(count) / n >= filter.min_fraction;
        if (count > 0 && (by_count || by_fraction))
            keep.push_back(c);
    }
    return keep;
}

LabelMatrix filter_categories(const LabelMatrix& labels, const CategoryFilter& filter)
{
    const auto keep = select_categories(labels, filter);
    if (keep.empty())
        throw ContractError("category filter removed every column");
    LabelMatrix out;
    out.doc_ids = labels.doc_ids;
    out.values.resize(labels.n(), static_cast<Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
        out.values.col(static_cast<Index>(i)) = labels.values.col(keep[i]);
        out.topics.push_back(labels.topics[static_cast<std::size_t>(keep[i])]);
    }
    return out;
}

NumericTable select_columns(const NumericTable& table, const std::vector<std::string>& topics)
{
    NumericTable out;
    out.doc_ids = table.doc_ids;
    out.topics = topics;
    out.values.resize(table.values.rows(), static_cast<Index>(topics.size()));
    for (std::size_t i = 0; i < topics.size(); ++i) {
        auto it = std::find(table.topics.begin(), table.topics.end(), topics[i]);
        if (it == table.topics.end())
            throw AlignmentError("topic \"" + topics[i] + "\" missing from table");
        out.values.col(static_cast<Index>(i)) = table.values.col(it - table.topics.begin());
    }
    return out;
}

LabelMatrix take_rows(const LabelMatrix& labels, const std::vector<Index>& rows)
{
    LabelMatrix out;
    out.topics = labels.topics;
    out.values = take_rows(labels.values, rows);
    for (Index r : rows)
        if (static_cast<std::size_t>(r) < labels.doc_ids.size())
            out.doc_ids.push_back(labels.doc_ids[static_cast<std::size_t>(r)]);
    return out;
}

Split stratified_split(const LabelMatrix& labels, double test_fraction, std::uint64_t seed)
{
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ContractError("test_fraction must lie in (0, 1)");
    const Index n = labels.n();
    const Index m = labels.m();

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    // Fold 0 = train, fold 1 = test.
    const double fractions[2] = {1.0 - test_fraction, test_fraction};
    Index capacity[2];
    capacity[1] = static_cast<Index>(std::llround(test_fraction * static_cast<double>(n)));
    capacity[0] = n - capacity[1];

    std::vector<double> desired[2];
    for (int f = 0; f < 2; ++f) {
        desired[f].resize(static_cast<std::size_t>(m));
        for (Index c = 0; c < m; ++c)
            desired[f][static_cast<std::size_t>(c)] =
                fractions[f] * static_cast<double>(labels.values.col(c).sum());
    }
    for (Index c = 0; c < m; ++c)
        if (labels.values.col(c).sum() < 2)
            warn("class \"" + labels.topics[static_cast<std::size_t>(c)] +
                 "\" has fewer than 2 positives; placement is best effort");

    std::vector<int> fold_of(static_cast<std::size_t>(n), -1);
    std::vector<Index> remaining(static_cast<std::size_t>(m));
    for (Index c = 0; c < m; ++c)
        remaining[static_cast<std::size_t>(c)] = labels.values.col(c).sum();
    Index assigned[2] = {0, 0};

    auto assign = [&](Index doc, int f) {
        fold_of[static_cast<std::size_t>(doc)] = f;
        ++assigned[f];
        for (Index c = 0; c < m; ++c)
            if (labels.values(doc, c) != 0) {
                desired[f][static_cast<std::size_t>(c)] -= 1.0;
                --remaining[static_cast<std::size_t>(c)];
            }
    };
    auto room = [&](int f) { return assigned[f] < capacity[f]; };

    for (;;) {
        // Rarest class with unassigned positives.
        Index label = -1;
        for (Index c = 0; c < m; ++c) {
            const Index r = remaining[static_cast<std::size_t>(c)];
            if (r > 0 && (label < 0 || r < remaining[static_cast<std::size_t>(label)]))
                label = c;
        }
        if (label < 0)
            break;
        for (Index doc : order) {
            if (fold_of[static_cast<std::size_t>(doc)] >= 0 || labels.values(doc, label) == 0)
                continue;
            int f;
            if (!room(0))
                f = 1;
            else if (!room(1))
                f = 0;
            else {
                const double d0 = desired[0][static_cast<std::size_t>(label)];
                const double d1 = desired[1][static_cast<std::size_t>(label)];
                if (d0 != d1)
                    f = d1 > d0 ? 1 : 0;
                else {
                    const double left0 = static_cast<double>(capacity[0] - assigned[0]);
                    const double left1 = static_cast<double>(capacity[1] - assigned[1]);
                    f = left1 > left0 ? 1 : 0;
                }
            }
            assign(doc, f);
        }
    }
    // Documents without labels fill whatever capacity is left.
    for (Index doc : order) {
        if (fold_of[static_cast<std::size_t>(doc)] >= 0)
            continue;
        const double left0 = static_cast<double>(capacity[0] - assigned[0]) / fractions[0];
        const double left1 = static_cast<double>(capacity[1] - assigned[1]) / fractions[1];
        assign(doc, room(1) && (left1 >= left0 || !room(0)) ? 1 : 0);
    }

    Split s;
    for (Index i = 0; i < n; ++i)
        (fold_of[static_cast<std::size_t>(i)] == 1 ? s.test : s.train).push_back(i);
    return s;
}

} // namespace bfv::ingest

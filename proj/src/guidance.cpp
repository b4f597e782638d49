#include "bfv/guidance.hpp"

#include <algorithm>

#include "bfv/ingest/preprocess.hpp"

namespace bfv::guidance {

std::string to_string(Source s)
{
    switch (s) {
    case Source::zero_shot: return "zero-shot";
    case Source::seeded_topic: return "seeded-topic";
    case Source::mixed: return "mixed";
    case Source::ground_truth: return "ground-truth";
    case Source::unknown: break;
    }
    return "unknown";
}

void require_unit_interval(const Tensor& values, const std::string& what)
{
    diff::require_finite(values, what);
    if (values.size() > 0 && (values.minCoeff() < 0.0 || values.maxCoeff() > 1.0))
        throw ContractError(what + ": entries must lie in [0, 1]");
}

Tensor scale_unit_interval(const Tensor& raw)
{
    diff::require_finite(raw, "scale_unit_interval");
    Tensor out(raw.rows(), raw.cols());
    for (Index c = 0; c < raw.cols(); ++c) {
        if (raw.rows() == 0)
            break;
        const double lo = raw.col(c).minCoeff();
        const double hi = raw.col(c).maxCoeff();
        if (hi > lo)
            out.col(c) = (raw.col(c).array() - lo) / (hi - lo);
        else
            out.col(c).setConstant(0.5);
    }
    return out;
}

GuidanceMatrix scale_unit_interval(const ingest::NumericTable& raw, Source source,
                                   bool is_probability)
{
    GuidanceMatrix g;
    g.topics = raw.topics;
    g.doc_ids = raw.doc_ids;
    g.source = source;
    if (is_probability) {
        require_unit_interval(raw.values, "probability guidance");
        g.values = raw.values;
    } else {
        g.values = scale_unit_interval(raw.values);
    }
    return g;
}

GuidanceMatrix combine(const GuidanceMatrix& t1, const GuidanceMatrix& t2, double omega)
{
    if (!(omega >= 0.0 && omega <= 1.0))
        throw ContractError("combine: omega must lie in [0, 1]");
    if (t1.topics != t2.topics)
        throw AlignmentError("combine: topic names differ between guidance matrices");
    if (t1.n() != t2.n() || t1.m() != t2.m())
        throw AlignmentError("combine: shapes differ (" + diff::shape_string(t1.values) + " vs " +
                             diff::shape_string(t2.values) + ")");
    require_unit_interval(t1.values, "combine t1");
    require_unit_interval(t2.values, "combine t2");
    GuidanceMatrix out;
    out.topics = t1.topics;
    out.doc_ids = t1.doc_ids;
    out.source = Source::mixed;
    // Elementwise so that equal inputs and the ω endpoints reproduce their
    // source exactly and results never leave [min, max] through rounding.
    out.values = t1.values.binaryExpr(t2.values, [omega](double a, double b) {
        if (a == b || omega == 1.0)
            return a;
        if (omega == 0.0)
            return b;
        const double mixed = omega * a + (1.0 - omega) * b;
        return std::clamp(mixed, std::min(a, b), std::max(a, b));
    });
    return out;
}

GuidanceMatrix from_labels(const ingest::LabelMatrix& labels)
{
    return {labels.values.cast<double>(), labels.topics, labels.doc_ids, Source::ground_truth};
}

GuidanceMatrix read_guidance(const std::filesystem::path& path, Source source,
                             bool is_probability)
{
    return scale_unit_interval(ingest::read_table(path), source, is_probability);
}

ingest::NumericTable to_table(const GuidanceMatrix& g)
{
    return {g.values, g.topics, g.doc_ids};
}

void write_guidance(const std::filesystem::path& path, const GuidanceMatrix& g,
                    const std::string& comment)
{
    ingest::write_table(path, to_table(g), comment);
}

GuidanceMatrix select_topics(const GuidanceMatrix& g, const std::vector<std::string>& topics)
{
    if (g.topics == topics)
        return g;
    auto table = ingest::select_columns(to_table(g), topics);
    return {std::move(table.values), topics, g.doc_ids, g.source};
}

GuidanceMatrix take_rows(const GuidanceMatrix& g, const std::vector<Index>& rows)
{
    GuidanceMatrix out;
    out.values = ingest::take_rows(g.values, rows);
    out.topics = g.topics;
    out.source = g.source;
    for (Index r : rows)
        if (static_cast<std::size_t>(r) < g.doc_ids.size())
            out.doc_ids.push_back(g.doc_ids[static_cast<std::size_t>(r)]);
    return out;
}

} // namespace bfv::guidance

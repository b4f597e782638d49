#include "bfv/pipeline.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "bfv/calib/flow.hpp"
#include "bfv/calib/whitening.hpp"
#include "bfv/ingest/pooling.hpp"
#include "bfv/log.hpp"

namespace bfv::pipeline {

using json = nlohmann::ordered_json;

namespace {

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body())
{
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

fs::path resolve(const fs::path& base, const std::string& p)
{
    const fs::path path(p);
    if (path.empty() || path.is_absolute() || base.empty())
        return path;
    return base / path;
}

void require_one_of(const std::string& value, std::initializer_list<const char*> allowed,
                    const std::string& key)
{
    for (const char* a : allowed)
        if (value == a)
            return;
    std::string list;
    for (const char* a : allowed)
        list += (list.empty() ? "" : " | ") + std::string(a);
    throw ContractError("config: " + key + " must be one of " + list + ", got '" + value + "'");
}

std::vector<std::string> path_strings(const std::vector<fs::path>& paths)
{
    std::vector<std::string> out;
    for (const auto& p : paths)
        out.push_back(p.generic_string());
    return out;
}

Tensor calibrate_matrix(const Tensor& train_x, const Tensor& all_x, const RunConfig& cfg,
                        std::uint64_t seed, const std::optional<fs::path>& model_path)
{
    if (cfg.calibration == "none")
        return all_x;
    if (cfg.calibration == "whiten") {
        const auto w = calib::whiten_fit(train_x);
        return calib::whiten_apply(w, all_x);
    }
    calib::FlowTrainOptions opts;
    opts.lr = cfg.flow_lr;
    opts.epochs = cfg.flow_epochs;
    opts.batch = std::min(cfg.flow_batch, train_x.rows());
    opts.seed = seed;
    auto trained = calib::flow_train(calib::flow_init(train_x.cols(), cfg.flow_steps, seed), train_x, opts);
    if (model_path)
        calib::save_flow(*model_path, trained.model);
    return calib::flow_forward(trained.model, all_x).z;
}

// Pools each layer of token input, or passes sentence embeddings through.
std::vector<ingest::EmbeddingMatrix> pooled_layers(const RunConfig& cfg, const std::string& mode)
{
    std::vector<ingest::EmbeddingMatrix> layers;
    if (!cfg.embeddings.empty()) {
        for (const auto& p : cfg.embeddings)
            layers.push_back(ingest::read_embeddings(p));
        return layers;
    }
    for (const auto& p : cfg.tokens) {
        const auto set = ingest::read_token_embeddings(p);
        if (mode == "cls")
            layers.push_back(ingest::cls_pool(set));
        else if (mode == "tfidf")
            layers.push_back(ingest::tfidf_pool(set, ingest::document_frequency(set), set.n()));
        else
            layers.push_back(ingest::mean_pool(set));
    }
    return layers;
}

std::vector<int> layer_selection(const RunConfig& cfg, std::size_t available)
{
    return cfg.layers.empty() ? ingest::default_layer_selection(available) : cfg.layers;
}

// Calibrates (per layer or after averaging) and averages the selected layers.
Tensor calibrated_average(const std::vector<ingest::EmbeddingMatrix>& layers, const RunConfig& cfg,
                          const std::vector<Index>& train_rows, const std::string& tag,
                          const std::optional<fs::path>& artifact_dir)
{
    const auto selection = layer_selection(cfg, layers.size());
    auto model_path = [&](const std::string& suffix) -> std::optional<fs::path> {
        if (!artifact_dir || cfg.calibration != "flow")
            return std::nullopt;
        return *artifact_dir / ("flow_" + tag + suffix + ".bfvf");
    };
    const std::uint64_t seed = cfg.effective_seed();
    if (cfg.calibrate_per_layer) {
        std::vector<ingest::EmbeddingMatrix> calibrated;
        for (std::size_t k = 0; k < selection.size(); ++k) {
            const int layer = selection[k];
            if (layer < 0 || static_cast<std::size_t>(layer) >= layers.size())
                throw ContractError("layer index " + std::to_string(layer) + " out of range");
            const Tensor& x = layers[static_cast<std::size_t>(layer)].rows;
            ingest::EmbeddingMatrix m;
            m.rows = calibrate_matrix(ingest::take_rows(x, train_rows), x, cfg,
                                      seed + static_cast<std::uint64_t>(layer),
                                      model_path("_layer" + std::to_string(layer)));
            calibrated.push_back(std::move(m));
        }
        std::vector<int> all(calibrated.size());
        for (std::size_t k = 0; k < all.size(); ++k)
            all[k] = static_cast<int>(k);
        return ingest::average_layers(calibrated, all).rows;
    }
    const Tensor avg = ingest::average_layers(layers, selection).rows;
    return calibrate_matrix(ingest::take_rows(avg, train_rows), avg, cfg, seed, model_path(""));
}

guidance::GuidanceMatrix aligned_guidance(const fs::path& path, guidance::Source source, bool is_probability,
                                          const ingest::LabelMatrix& labels)
{
    auto g = guidance::read_guidance(path, source, is_probability);
    if (g.doc_ids != labels.doc_ids)
        throw AlignmentError("document ids of " + path.string() + " do not match the labels");
    return guidance::select_topics(g, labels.topics);
}

void write_prediction(const fs::path& dir, const vae::Prediction& pred, const ingest::LabelMatrix& test_labels,
                      const std::string& comment)
{
    ingest::NumericTable probs{pred.probabilities, test_labels.topics, test_labels.doc_ids};
    ingest::write_table(dir / "predictions.csv", probs, comment);
    ingest::LabelMatrix binary{pred.binary, test_labels.topics, test_labels.doc_ids};
    ingest::write_labels(dir / "predictions_binary.csv", binary, comment);
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot open for writing: " + path.string());
    out << text;
}

std::string optional_number(const std::optional<double>& v)
{
    return v ? format_number(*v) : "";
}

} // namespace

std::string format_number(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc())
        throw InternalError("format_number failed");
    return std::string(buf, ptr);
}

std::uint64_t fnv1a64(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

RunConfig parse_config(const std::string& json_text, const fs::path& base_dir)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    if (!j.is_object())
        throw FormatError("config: top level must be an object");

    static const std::vector<std::string> known = {
        "embeddings", "tokens", "labels", "guidance_a", "guidance_b", "guidance_a_probability",
        "guidance_b_probability", "output_dir", "pooling", "calibration", "layers",
        "calibrate_per_layer", "omega", "gamma", "epochs", "lr", "batch", "seed", "threshold",
        "test_fraction", "hps", "encoder_only", "topic_loss", "flow_steps", "flow_epochs", "flow_lr",
        "flow_batch", "min_count", "min_fraction", "drop_categories", "gamma_grid", "omega_grid"};
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ContractError("config: unknown key '" + key + "'");

    RunConfig c;
    try {
        auto paths = [&](const char* key, std::vector<fs::path>& out) {
            if (!j.contains(key))
                return;
            const auto& v = j.at(key);
            if (v.is_string())
                out.push_back(resolve(base_dir, v.get<std::string>()));
            else
                for (const auto& s : v)
                    out.push_back(resolve(base_dir, s.get<std::string>()));
        };
        auto path = [&](const char* key, fs::path& out) {
            if (j.contains(key))
                out = resolve(base_dir, j.at(key).get<std::string>());
        };
        auto get = [&](const char* key, auto& out) {
            if (j.contains(key))
                j.at(key).get_to(out);
        };
        paths("embeddings", c.embeddings);
        paths("tokens", c.tokens);
        path("labels", c.labels);
        path("guidance_a", c.guidance_a);
        path("guidance_b", c.guidance_b);
        path("output_dir", c.output_dir);
        get("guidance_a_probability", c.guidance_a_probability);
        get("guidance_b_probability", c.guidance_b_probability);
        get("pooling", c.pooling);
        get("calibration", c.calibration);
        get("layers", c.layers);
        get("calibrate_per_layer", c.calibrate_per_layer);
        get("omega", c.omega);
        get("gamma", c.gamma);
        get("epochs", c.epochs);
        get("lr", c.lr);
        get("batch", c.batch);
        if (j.contains("seed"))
            c.seed = j.at("seed").get<std::uint64_t>();
        get("threshold", c.threshold);
        get("test_fraction", c.test_fraction);
        get("hps", c.hps);
        get("encoder_only", c.encoder_only);
        get("topic_loss", c.topic_loss);
        get("flow_steps", c.flow_steps);
        get("flow_epochs", c.flow_epochs);
        get("flow_lr", c.flow_lr);
        get("flow_batch", c.flow_batch);
        get("min_count", c.filter.min_count);
        get("min_fraction", c.filter.min_fraction);
        get("drop_categories", c.filter.drop_names);
        get("gamma_grid", c.gamma_grid);
        get("omega_grid", c.omega_grid);
    } catch (const json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig load_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open config: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

void apply_overrides(RunConfig& cfg, const Overrides& ov)
{
    if (ov.gamma)
        cfg.gamma = *ov.gamma;
    if (ov.omega)
        cfg.omega = *ov.omega;
    if (ov.pooling)
        cfg.pooling = *ov.pooling;
    if (ov.calibration)
        cfg.calibration = *ov.calibration;
    if (ov.epochs)
        cfg.epochs = *ov.epochs;
    if (ov.seed) {
        cfg.seed = *ov.seed;
    } else if (!cfg.seed) {
        if (const char* env = std::getenv("BFV_SEED"); env != nullptr && *env != '\0') {
            std::uint64_t v = 0;
            const char* end = env + std::char_traits<char>::length(env);
            auto [ptr, ec] = std::from_chars(env, end, v);
            if (ec != std::errc() || ptr != end)
                throw ContractError(std::string("BFV_SEED is not an unsigned integer: ") + env);
            cfg.seed = v;
        }
    }
}

void validate(const RunConfig& cfg)
{
    require_one_of(cfg.pooling, {"cls", "mean", "tfidf"}, "pooling");
    require_one_of(cfg.calibration, {"flow", "whiten", "none"}, "calibration");
    require_one_of(cfg.topic_loss, {"positive", "symmetric"}, "topic_loss");
    if (cfg.embeddings.empty() == cfg.tokens.empty())
        throw ContractError("config: give exactly one of embeddings or tokens");
    if (cfg.labels.empty())
        throw ContractError("config: labels is required");
    if (cfg.guidance_a.empty())
        throw ContractError("config: guidance_a is required");
    std::vector<fs::path> must_exist = cfg.embeddings;
    must_exist.insert(must_exist.end(), cfg.tokens.begin(), cfg.tokens.end());
    must_exist.push_back(cfg.labels);
    must_exist.push_back(cfg.guidance_a);
    if (!cfg.guidance_b.empty())
        must_exist.push_back(cfg.guidance_b);
    for (const auto& p : must_exist)
        if (!fs::exists(p))
            throw ContractError("config: missing input " + p.string());
    if (!(cfg.omega >= 0.0 && cfg.omega <= 1.0))
        throw ContractError("config: omega must lie in [0, 1]");
    if (!(cfg.gamma > 0.0))
        throw ContractError("config: gamma must be positive");
    if (cfg.epochs < 1 || cfg.flow_epochs < 0 || cfg.flow_steps < 1)
        throw ContractError("config: epochs and flow_steps must be positive");
    if (cfg.batch < 1 || cfg.flow_batch < 1)
        throw ContractError("config: batch sizes must be positive");
    if (!(cfg.lr > 0.0) || !(cfg.flow_lr > 0.0))
        throw ContractError("config: learning rates must be positive");
    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
        throw ContractError("config: test_fraction must lie in (0, 1)");
    if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0))
        throw ContractError("config: threshold must lie in (0, 1)");
}

std::string config_json(const RunConfig& c)
{
    json j;
    j["embeddings"] = path_strings(c.embeddings);
    j["tokens"] = path_strings(c.tokens);
    j["labels"] = c.labels.generic_string();
    j["guidance_a"] = c.guidance_a.generic_string();
    j["guidance_b"] = c.guidance_b.generic_string();
    j["guidance_a_probability"] = c.guidance_a_probability;
    j["guidance_b_probability"] = c.guidance_b_probability;
    j["pooling"] = c.pooling;
    j["calibration"] = c.calibration;
    j["layers"] = c.layers;
    j["calibrate_per_layer"] = c.calibrate_per_layer;
    j["omega"] = c.omega;
    j["gamma"] = c.gamma;
    j["epochs"] = c.epochs;
    j["lr"] = c.lr;
    j["batch"] = c.batch;
    j["seed"] = c.effective_seed();
    j["threshold"] = c.threshold;
    j["test_fraction"] = c.test_fraction;
    j["hps"] = c.hps;
    j["encoder_only"] = c.encoder_only;
    j["topic_loss"] = c.topic_loss;
    j["flow_steps"] = c.flow_steps;
    j["flow_epochs"] = c.flow_epochs;
    j["flow_lr"] = c.flow_lr;
    j["flow_batch"] = c.flow_batch;
    j["min_count"] = c.filter.min_count;
    j["min_fraction"] = c.filter.min_fraction;
    j["drop_categories"] = c.filter.drop_names;
    return j.dump();
}

std::string config_digest(const RunConfig& cfg)
{
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(config_json(cfg))));
    return buf;
}

std::string provenance_line(const RunConfig& cfg)
{
    return "provenance: config=" + config_digest(cfg) + " seed=" + std::to_string(cfg.effective_seed());
}

Prepared prepare(const RunConfig& cfg, const PrepareOptions& options)
{
    stage("config", [&] { validate(cfg); });
    Prepared p;

    stage("load", [&] {
        p.labels = ingest::filter_categories(ingest::read_labels(cfg.labels), cfg.filter);
        p.backend_a = aligned_guidance(cfg.guidance_a, guidance::Source::zero_shot,
                                       cfg.guidance_a_probability, p.labels);
        if (!cfg.guidance_b.empty())
            p.backend_b = aligned_guidance(cfg.guidance_b, guidance::Source::seeded_topic,
                                           cfg.guidance_b_probability, p.labels);
    });

    const std::vector<ingest::EmbeddingMatrix> layers = stage("pool", [&] {
        auto out = pooled_layers(cfg, cfg.pooling);
        for (const auto& l : out)
            if (l.n() != p.labels.n())
                throw AlignmentError("embeddings have " + std::to_string(l.n()) + " rows, labels " +
                                     std::to_string(p.labels.n()));
        return out;
    });

    p.split = stage("split", [&] {
        return ingest::stratified_split(p.labels, cfg.test_fraction, cfg.effective_seed());
    });

    stage("calibrate", [&] {
        p.calibrated.rows = calibrated_average(layers, cfg, p.split.train, "main", options.artifact_dir);
        p.calibrated.provenance.layers = layer_selection(cfg, layers.size());
        p.calibrated.provenance.pooling = cfg.embeddings.empty() ? cfg.pooling : "given";
        p.calibrated.provenance.calibration = cfg.calibration;
        if (options.artifact_dir)
            ingest::write_embeddings(*options.artifact_dir / "calibrated.bfve", p.calibrated);

        if (options.ablation_views) {
            RunConfig raw = cfg;
            raw.calibration = "none";
            const auto mean_layers = cfg.embeddings.empty() ? pooled_layers(cfg, "mean") : layers;
            p.raw_mean = calibrated_average(mean_layers, raw, p.split.train, "raw", std::nullopt);
            RunConfig cal = cfg;
            if (cal.calibration == "none")
                cal.calibration = "flow";
            p.calibrated_mean = calibrated_average(mean_layers, cal, p.split.train, "mean", std::nullopt);
            if (!cfg.tokens.empty())
                p.calibrated_tfidf =
                    calibrated_average(pooled_layers(cfg, "tfidf"), cal, p.split.train, "tfidf", std::nullopt);
        }
    });
    return p;
}

guidance::GuidanceMatrix combined_guidance(const Prepared& p, double omega)
{
    if (!p.backend_b)
        return p.backend_a;
    return guidance::combine(p.backend_a, *p.backend_b, omega);
}

vae::LossConfig loss_config(const RunConfig& cfg, double gamma)
{
    vae::LossConfig lc;
    lc.gamma = gamma;
    lc.hps = cfg.hps;
    lc.use_reconstruction = !cfg.encoder_only;
    lc.use_kld = !cfg.encoder_only;
    lc.topic_loss = cfg.topic_loss == "symmetric" ? vae::TopicLoss::symmetric : vae::TopicLoss::positive_only;
    return lc;
}

vae::TrainOptions train_options(const RunConfig& cfg)
{
    vae::TrainOptions o;
    o.lr = cfg.lr;
    o.epochs = cfg.epochs;
    o.batch = cfg.batch;
    o.seed = cfg.effective_seed();
    return o;
}

PointResult run_point(const Prepared& p, const RunConfig& cfg, double gamma, double omega)
{
    PointResult r;
    const auto t = stage("combine", [&] { return combined_guidance(p, omega); });
    r.trained = stage("train", [&] {
        return vae::train(ingest::take_rows(p.calibrated.rows, p.split.train),
                          guidance::take_rows(t, p.split.train), loss_config(cfg, gamma), train_options(cfg));
    });
    r.prediction = stage("predict", [&] {
        return vae::predict(r.trained.model, ingest::take_rows(p.calibrated.rows, p.split.test), cfg.threshold);
    });
    r.report = stage("evaluate", [&] {
        const auto gold = ingest::take_rows(p.labels, p.split.test);
        return metrics::evaluate(gold.values, r.prediction.probabilities, r.prediction.binary);
    });
    return r;
}

RunResult run(const RunConfig& cfg)
{
    RunResult out;
    out.output_dir = cfg.output_dir;
    const std::string prov = provenance_line(cfg);
    stage("write", [&] {
        fs::create_directories(cfg.output_dir);
        json j;
        j["provenance"] = prov;
        j["config"] = json::parse(config_json(cfg));
        write_text(cfg.output_dir / "provenance.json", j.dump(2) + "\n");
    });

    PrepareOptions po;
    po.artifact_dir = cfg.output_dir;
    po.provenance = prov;
    out.prepared = prepare(cfg, po);
    const Prepared& p = out.prepared;

    const auto t = stage("combine", [&] {
        auto g = combined_guidance(p, cfg.omega);
        guidance::write_guidance(cfg.output_dir / "guidance_combined.csv", g, prov);
        return g;
    });
    (void)t;

    out.point = run_point(p, cfg, cfg.gamma, cfg.omega);

    stage("write", [&] {
        vae::save_vae(cfg.output_dir / "model.bfvm", out.point.trained.model);
        const auto test_labels = ingest::take_rows(p.labels, p.split.test);
        write_prediction(cfg.output_dir, out.point.prediction, test_labels, prov);
        metrics::write_report_text(cfg.output_dir / "metrics.txt", out.point.report, prov);
        metrics::write_report_json(cfg.output_dir / "metrics.json", out.point.report, prov);

        std::ofstream trace(cfg.output_dir / "loss_trace.csv");
        trace << "# " << prov << "\nepoch,total,reconstruction,kld,topic\n";
        for (std::size_t e = 0; e < out.point.trained.trace.size(); ++e) {
            const auto& s = out.point.trained.trace[e];
            trace << e << ',' << format_number(s.total) << ',' << format_number(s.reconstruction) << ','
                  << format_number(s.kld) << ',' << format_number(s.topic) << '\n';
        }
    });
    return out;
}

std::vector<SweepRow> sweep(const RunConfig& cfg, const std::vector<double>& gammas,
                            const std::vector<double>& omegas)
{
    if (gammas.empty() || omegas.empty())
        throw ContractError("sweep: grids must be non-empty");
    const Prepared p = prepare(cfg);
    std::vector<SweepRow> rows;
    for (double g : gammas)
        for (double w : omegas) {
            SweepRow row;
            row.gamma = g;
            row.omega = w;
            try {
                if (!(g > 0.0))
                    throw ContractError("gamma must be positive");
                row.report = run_point(p, cfg, g, w).report;
            } catch (const std::exception& e) {
                row.status = std::string("failed: ") + e.what();
                warn("sweep point gamma=" + format_number(g) + " omega=" + format_number(w) + " " + row.status);
            }
            rows.push_back(std::move(row));
        }
    return rows;
}

namespace {

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"')
            q += '"';
        q += c == '\n' ? ' ' : c;
    }
    return q + "\"";
}

const std::vector<std::string> kTableMetrics = {"f1", "precision", "recall", "acc", "hamming_score",
                                                "macro_f1", "macro_precision", "macro_recall",
                                                "aps", "auc", "p_at_3"};

void write_metric_fields(std::ostream& out, const std::optional<metrics::MetricsReport>& r)
{
    if (!r) {
        for (std::size_t k = 0; k < kTableMetrics.size(); ++k)
            out << ',';
        return;
    }
    const auto entries = metrics::report_entries(*r);
    for (const auto& name : kTableMetrics)
        for (const auto& [n, v] : entries)
            if (n == name)
                out << ',' << optional_number(v);
}

void write_metric_header(std::ostream& out)
{
    for (const auto& name : kTableMetrics)
        out << ',' << name;
}

} // namespace

void write_sweep_table(std::ostream& out, const std::vector<SweepRow>& rows, const std::string& comment)
{
    if (!comment.empty())
        out << "# " << comment << '\n';
    out << "gamma,omega";
    write_metric_header(out);
    out << ",status\n";
    for (const auto& r : rows) {
        out << format_number(r.gamma) << ',' << format_number(r.omega);
        write_metric_fields(out, r.report);
        out << ',' << csv_field(r.status) << '\n';
    }
}

std::string ablation_stage_name(int stage)
{
    switch (stage) {
    case 1: return "backend";
    case 2: return "encoder";
    case 3: return "flow_encoder";
    case 4: return "flow_vae";
    case 5: return "flow_vae_tfidf";
    case 6: return "flow_vae_tfidf_hps";
    default: throw ContractError("ablation stage must be in 1..6");
    }
}

std::vector<AblationRow> ablate(const RunConfig& cfg)
{
    PrepareOptions po;
    po.ablation_views = true;
    const Prepared p = prepare(cfg, po);
    const auto t = stage("combine", [&] { return combined_guidance(p, cfg.omega); });
    const auto gold = ingest::take_rows(p.labels, p.split.test);

    vae::AblationInputs in;
    in.guidance = &t;
    in.raw_mean = p.raw_mean;
    in.calibrated_mean = p.calibrated_mean;
    in.calibrated_tfidf = p.calibrated_tfidf;
    in.loss = loss_config(cfg, cfg.gamma);
    in.train = train_options(cfg);
    in.train_rows = p.split.train;
    in.eval_rows = p.split.test;

    std::vector<AblationRow> rows;
    for (int s = 1; s <= vae::kAblationStages; ++s) {
        AblationRow row;
        row.stage = s;
        row.name = ablation_stage_name(s);
        try {
            const auto pred = vae::ablation_variant(s, in);
            row.report = metrics::evaluate(gold.values, pred.probabilities, pred.binary);
        } catch (const std::exception& e) {
            row.status = std::string("failed: ") + e.what();
            warn("ablation stage " + std::to_string(s) + " " + row.status);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_ablation_table(std::ostream& out, const std::vector<AblationRow>& rows, const std::string& comment)
{
    if (!comment.empty())
        out << "# " << comment << '\n';
    out << "stage,name";
    write_metric_header(out);
    out << ",status\n";
    for (const auto& r : rows) {
        out << r.stage << ',' << r.name;
        write_metric_fields(out, r.report);
        out << ',' << csv_field(r.status) << '\n';
    }
}

} // namespace bfv::pipeline

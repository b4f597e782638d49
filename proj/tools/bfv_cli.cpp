#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bfv/calib/flow.hpp"
#include "bfv/calib/whitening.hpp"
#include "bfv/guidance.hpp"
#include "bfv/ingest/pooling.hpp"
#include "bfv/metrics.hpp"
#include "bfv/pipeline.hpp"
#include "bfv/synth.hpp"
#include "bfv/vae.hpp"

namespace fs = std::filesystem;
using namespace bfv;

namespace {

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag)
{
    if (flag)
        return *flag;
    pipeline::RunConfig probe;
    pipeline::apply_overrides(probe, {});
    return probe.effective_seed();
}

std::string seed_comment(std::uint64_t seed, const std::string& what)
{
    std::ostringstream s;
    s << "provenance: config=" << std::hex << std::setw(16) << std::setfill('0') << pipeline::fnv1a64(what)
      << std::dec << " seed=" << seed;
    return s.str();
}

void write_table_file(const std::string& path, const std::function<void(std::ostream&)>& body)
{
    if (path.empty() || path == "-") {
        body(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out)
        throw Error("cannot open for writing: " + path);
    body(out);
}

struct RunFlags {
    std::string config;
    std::optional<double> gamma;
    std::optional<double> omega;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> pooling;
    std::optional<std::string> calibration;
    std::optional<int> epochs;
    std::string output_dir;
};

void add_run_flags(CLI::App* cmd, RunFlags& f)
{
    cmd->add_option("config", f.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    cmd->add_option("--gamma", f.gamma, "KL/topic weighting γ");
    cmd->add_option("--omega", f.omega, "backend combination weight ω");
    cmd->add_option("--seed", f.seed, "random seed (falls back to BFV_SEED)");
    cmd->add_option("--pooling", f.pooling, "cls | mean | tfidf");
    cmd->add_option("--calib", f.calibration, "flow | whiten | none");
    cmd->add_option("--epochs", f.epochs, "VAE training epochs");
    cmd->add_option("--out-dir", f.output_dir, "artifact directory (overrides output_dir)");
}

pipeline::RunConfig config_from(const RunFlags& f)
{
    auto cfg = pipeline::load_config(f.config);
    pipeline::Overrides ov;
    ov.gamma = f.gamma;
    ov.omega = f.omega;
    ov.seed = f.seed;
    ov.pooling = f.pooling;
    ov.calibration = f.calibration;
    ov.epochs = f.epochs;
    pipeline::apply_overrides(cfg, ov);
    if (!f.output_dir.empty())
        cfg.output_dir = f.output_dir;
    return cfg;
}

std::vector<double> parse_grid(const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size())
            throw ContractError("bad grid value '" + item + "'");
        out.push_back(v);
    }
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Weakly supervised multi-label text classification over calibrated sentence embeddings"};
    app.require_subcommand(1);

    // pool
    auto* pool = app.add_subcommand("pool", "pool token embeddings into sentence embeddings");
    std::vector<std::string> pool_in;
    std::string pool_mode = "mean", pool_out;
    std::vector<int> pool_layers;
    pool->add_option("--tokens", pool_in, "BFVT file per layer")->required()->check(CLI::ExistingFile);
    pool->add_option("--mode", pool_mode, "cls | mean | tfidf")->check(CLI::IsMember({"cls", "mean", "tfidf"}));
    pool->add_option("--layers", pool_layers, "layers to average (default depends on count)")->delimiter(',');
    pool->add_option("--out", pool_out, "output BFVE")->required();

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "map embeddings toward a standard Gaussian");
    std::string cal_in, cal_out, cal_method = "flow", cal_model, cal_apply;
    int cal_epochs = 5, cal_steps = calib::kDefaultFlowSteps;
    double cal_lr = 1e-3;
    std::optional<std::uint64_t> cal_seed;
    cal->add_option("--in", cal_in, "input BFVE")->required()->check(CLI::ExistingFile);
    cal->add_option("--out", cal_out, "output BFVE")->required();
    cal->add_option("--method", cal_method, "flow | whiten | none")->check(CLI::IsMember({"flow", "whiten", "none"}));
    cal->add_option("--model", cal_model, "where to save the trained flow (BFVF)");
    cal->add_option("--apply", cal_apply, "apply a saved flow instead of training")->check(CLI::ExistingFile);
    cal->add_option("--epochs", cal_epochs, "flow training epochs");
    cal->add_option("--steps", cal_steps, "flow coupling steps");
    cal->add_option("--lr", cal_lr, "flow learning rate");
    cal->add_option("--seed", cal_seed, "random seed (falls back to BFV_SEED)");

    // combine
    auto* comb = app.add_subcommand("combine", "mix two guidance matrices");
    std::string comb_a, comb_b, comb_out;
    double comb_omega = guidance::kDefaultOmega;
    bool comb_a_minmax = false, comb_b_prob = false;
    comb->add_option("--a", comb_a, "first backend CSV")->required()->check(CLI::ExistingFile);
    comb->add_option("--b", comb_b, "second backend CSV")->required()->check(CLI::ExistingFile);
    comb->add_option("--omega", comb_omega, "weight of the first backend");
    comb->add_flag("--a-minmax", comb_a_minmax, "min-max scale the first backend");
    comb->add_flag("--b-probability", comb_b_prob, "second backend is already in [0, 1]");
    comb->add_option("--out", comb_out, "output CSV")->required();

    // train
    auto* tr = app.add_subcommand("train", "train the VAE on embeddings and guidance");
    std::string tr_emb, tr_guid, tr_out, tr_topic = "positive";
    double tr_gamma = 1.0, tr_lr = 1e-3;
    int tr_epochs = 10;
    diff::Index tr_batch = 64;
    bool tr_no_hps = false, tr_encoder_only = false, tr_minmax = false;
    std::optional<std::uint64_t> tr_seed;
    tr->add_option("--embeddings", tr_emb, "BFVE")->required()->check(CLI::ExistingFile);
    tr->add_option("--guidance", tr_guid, "guidance CSV in [0, 1]")->required()->check(CLI::ExistingFile);
    tr->add_option("--out", tr_out, "output model (BFVM)")->required();
    tr->add_option("--gamma", tr_gamma, "KL/topic weighting γ");
    tr->add_option("--epochs", tr_epochs, "training epochs");
    tr->add_option("--lr", tr_lr, "learning rate");
    tr->add_option("--batch", tr_batch, "minibatch size");
    tr->add_option("--seed", tr_seed, "random seed (falls back to BFV_SEED)");
    tr->add_option("--topic-loss", tr_topic, "positive | symmetric")->check(CLI::IsMember({"positive", "symmetric"}));
    tr->add_flag("--no-hps", tr_no_hps, "disable hyper-parameter scheduling");
    tr->add_flag("--encoder-only", tr_encoder_only, "drop reconstruction and KL terms");
    tr->add_flag("--minmax", tr_minmax, "min-max scale the guidance first");

    // predict
    auto* pr = app.add_subcommand("predict", "score documents with a trained model");
    std::string pr_model, pr_emb, pr_out, pr_binary, pr_ids;
    double pr_threshold = vae::kDefaultThreshold;
    pr->add_option("--model", pr_model, "BFVM")->required()->check(CLI::ExistingFile);
    pr->add_option("--embeddings", pr_emb, "BFVE")->required()->check(CLI::ExistingFile);
    pr->add_option("--ids", pr_ids, "CSV whose doc_id column and topic names label the output")
        ->check(CLI::ExistingFile);
    pr->add_option("--out", pr_out, "probabilities CSV")->required();
    pr->add_option("--binary-out", pr_binary, "thresholded labels CSV");
    pr->add_option("--threshold", pr_threshold, "decision threshold");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "score predictions against gold labels");
    std::string ev_gold, ev_probs, ev_binary, ev_out, ev_json;
    double ev_threshold = vae::kDefaultThreshold;
    ev->add_option("--labels", ev_gold, "gold labels CSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--predictions", ev_probs, "probabilities CSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--binary", ev_binary, "thresholded labels CSV (default: threshold the probabilities)")
        ->check(CLI::ExistingFile);
    ev->add_option("--threshold", ev_threshold, "threshold when --binary is absent");
    ev->add_option("--out", ev_out, "text report (default stdout)");
    ev->add_option("--json", ev_json, "JSON report");

    // run / sweep / ablate
    RunFlags run_flags, sweep_flags, ablate_flags;
    auto* run = app.add_subcommand("run", "pool, calibrate, combine, train, predict and evaluate");
    add_run_flags(run, run_flags);

    auto* sw = app.add_subcommand("sweep", "γ × ω sensitivity table");
    add_run_flags(sw, sweep_flags);
    std::string sw_gammas, sw_omegas, sw_out;
    sw->add_option("--gammas", sw_gammas, "comma-separated γ grid (default from config)");
    sw->add_option("--omegas", sw_omegas, "comma-separated ω grid (default from config)");
    sw->add_option("--out", sw_out, "CSV table (default stdout)");

    auto* ab = app.add_subcommand("ablate", "six-stage ablation table");
    add_run_flags(ab, ablate_flags);
    std::string ab_out;
    ab->add_option("--out", ab_out, "CSV table (default stdout)");

    // synth
    auto* sy = app.add_subcommand("synth", "generate a synthetic corpus with known topics");
    synth::SynthConfig sc;
    std::string sy_out;
    std::optional<std::uint64_t> sy_seed;
    sy->add_option("--out", sy_out, "output directory")->required();
    sy->add_option("--n", sc.n, "documents");
    sy->add_option("--m", sc.m, "topics");
    sy->add_option("--v", sc.v, "embedding width");
    sy->add_option("--prior", sc.topic_prior, "per-topic label probability");
    sy->add_option("--noise", sc.noise_scale, "noise scale");
    sy->add_option("--anisotropy", sc.anisotropy, "noise condition number");
    sy->add_option("--blur", sc.blur, "blur rate of the dense backend");
    sy->add_option("--flip", sc.flip, "flip rate of the sparse backend");
    sy->add_option("--drop", sc.drop, "positive drop rate of the sparse backend");
    sy->add_option("--tokens", sc.tokens_per_doc, "tokens per document for a token-level view (0: none)");
    sy->add_option("--seed", sy_seed, "random seed (falls back to BFV_SEED)");

    CLI11_PARSE(app, argc, argv);

    std::string current = "cli";
    try {
        if (*pool) {
            current = "pool";
            std::vector<ingest::EmbeddingMatrix> layers;
            for (const auto& p : pool_in) {
                const auto set = ingest::read_token_embeddings(p);
                if (pool_mode == "cls")
                    layers.push_back(ingest::cls_pool(set));
                else if (pool_mode == "tfidf")
                    layers.push_back(ingest::tfidf_pool(set, ingest::document_frequency(set), set.n()));
                else
                    layers.push_back(ingest::mean_pool(set));
            }
            const auto sel = pool_layers.empty() ? ingest::default_layer_selection(layers.size()) : pool_layers;
            ingest::write_embeddings(pool_out, ingest::average_layers(layers, sel));
        } else if (*cal) {
            current = "calibrate";
            auto e = ingest::read_embeddings(cal_in);
            const std::uint64_t seed = resolve_seed(cal_seed);
            if (!cal_apply.empty()) {
                e.rows = calib::flow_forward(calib::load_flow(cal_apply), e.rows).z;
                e.provenance.calibration = "flow";
            } else if (cal_method == "flow") {
                calib::FlowTrainOptions o;
                o.epochs = cal_epochs;
                o.lr = cal_lr;
                o.seed = seed;
                o.batch = std::min<diff::Index>(o.batch, e.n());
                auto r = calib::flow_train(calib::flow_init(e.dim(), cal_steps, seed), e.rows, o);
                std::cerr << "flow nll " << r.initial_nll << " -> "
                          << (r.epoch_nll.empty() ? r.initial_nll : r.epoch_nll.back()) << '\n';
                if (!cal_model.empty())
                    calib::save_flow(cal_model, r.model);
                e.rows = calib::flow_forward(r.model, e.rows).z;
                e.provenance.calibration = "flow";
            } else if (cal_method == "whiten") {
                e.rows = calib::whiten_apply(calib::whiten_fit(e.rows), e.rows);
                e.provenance.calibration = "whiten";
            }
            ingest::write_embeddings(cal_out, e);
        } else if (*comb) {
            current = "combine";
            const auto a = guidance::read_guidance(comb_a, guidance::Source::zero_shot, !comb_a_minmax);
            const auto b = guidance::read_guidance(comb_b, guidance::Source::seeded_topic, comb_b_prob);
            const auto out = guidance::combine(a, guidance::select_topics(b, a.topics), comb_omega);
            guidance::write_guidance(comb_out, out,
                                     seed_comment(0, comb_a + "|" + comb_b + "|" + pipeline::format_number(comb_omega)));
        } else if (*tr) {
            current = "train";
            const auto e = ingest::read_embeddings(tr_emb);
            const auto t = guidance::read_guidance(tr_guid, guidance::Source::unknown, !tr_minmax);
            vae::LossConfig lc;
            lc.gamma = tr_gamma;
            lc.hps = !tr_no_hps;
            lc.use_reconstruction = lc.use_kld = !tr_encoder_only;
            lc.topic_loss = tr_topic == "symmetric" ? vae::TopicLoss::symmetric : vae::TopicLoss::positive_only;
            vae::TrainOptions o;
            o.lr = tr_lr;
            o.epochs = tr_epochs;
            o.batch = tr_batch;
            o.seed = resolve_seed(tr_seed);
            const auto r = vae::train(e.rows, t, lc, o);
            for (std::size_t k = 0; k < r.trace.size(); ++k)
                std::cerr << "epoch " << k << " loss " << r.trace[k].total << '\n';
            vae::save_vae(tr_out, r.model);
        } else if (*pr) {
            current = "predict";
            const auto model = vae::load_vae(pr_model);
            const auto e = ingest::read_embeddings(pr_emb);
            const auto p = vae::predict(model, e.rows, pr_threshold);
            std::vector<std::string> topics, ids;
            if (!pr_ids.empty()) {
                const auto t = ingest::read_table(pr_ids);
                topics = t.topics;
                ids = t.doc_ids;
            }
            if (topics.size() != static_cast<std::size_t>(p.probabilities.cols())) {
                topics.clear();
                for (diff::Index j = 0; j < p.probabilities.cols(); ++j)
                    topics.push_back("topic" + std::to_string(j));
            }
            if (ids.size() != static_cast<std::size_t>(p.probabilities.rows())) {
                ids.clear();
                for (diff::Index i = 0; i < p.probabilities.rows(); ++i)
                    ids.push_back("d" + std::to_string(i));
            }
            ingest::write_table(pr_out, {p.probabilities, topics, ids});
            if (!pr_binary.empty())
                ingest::write_labels(pr_binary, {p.binary, topics, ids});
        } else if (*ev) {
            current = "evaluate";
            const auto gold = ingest::read_labels(ev_gold);
            const auto probs = ingest::select_columns(ingest::read_table(ev_probs), gold.topics);
            if (probs.doc_ids != gold.doc_ids)
                throw AlignmentError("prediction doc ids do not match the labels");
            Eigen::MatrixXi binary;
            if (!ev_binary.empty()) {
                binary = ingest::labels_from_table(ingest::select_columns(ingest::read_table(ev_binary), gold.topics))
                             .values;
            } else {
                binary = vae::threshold_scores(probs.values, ev_threshold).binary;
            }
            const auto report = metrics::evaluate(gold.values, probs.values, binary);
            if (ev_out.empty())
                metrics::write_report_text(std::cout, report);
            else
                metrics::write_report_text(fs::path(ev_out), report);
            if (!ev_json.empty())
                metrics::write_report_json(ev_json, report);
        } else if (*run) {
            current = "run";
            const auto cfg = config_from(run_flags);
            const auto r = pipeline::run(cfg);
            metrics::write_report_text(std::cout, r.point.report, pipeline::provenance_line(cfg));
        } else if (*sw) {
            current = "sweep";
            auto cfg = config_from(sweep_flags);
            const auto gammas = sw_gammas.empty() ? cfg.gamma_grid : parse_grid(sw_gammas);
            const auto omegas = sw_omegas.empty() ? cfg.omega_grid : parse_grid(sw_omegas);
            const auto rows = pipeline::sweep(cfg, gammas, omegas);
            write_table_file(sw_out, [&](std::ostream& out) {
                pipeline::write_sweep_table(out, rows, pipeline::provenance_line(cfg));
            });
        } else if (*ab) {
            current = "ablate";
            const auto cfg = config_from(ablate_flags);
            const auto rows = pipeline::ablate(cfg);
            write_table_file(ab_out, [&](std::ostream& out) {
                pipeline::write_ablation_table(out, rows, pipeline::provenance_line(cfg));
            });
        } else if (*sy) {
            current = "synth";
            sc.seed = resolve_seed(sy_seed);
            const auto data = synth::generate(sc);
            std::ostringstream key;
            key << sc.n << ',' << sc.m << ',' << sc.v << ',' << sc.topic_prior << ',' << sc.noise_scale << ','
                << sc.anisotropy << ',' << sc.blur << ',' << sc.flip << ',' << sc.drop << ',' << sc.tokens_per_doc;
            synth::write_dataset(sy_out, data, seed_comment(sc.seed, key.str()));
        }
    } catch (const pipeline::StageError& e) {
        std::cerr << "error in stage " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error in " << current << ": " << e.what() << '\n';
        return 1;
    }
    return 0;
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bfv/errors.hpp"
#include "bfv/guidance.hpp"
#include "bfv/ingest/preprocess.hpp"
#include "bfv/metrics.hpp"
#include "bfv/vae.hpp"

namespace bfv::pipeline {

using diff::Index;
using diff::Tensor;
namespace fs = std::filesystem;

// A failure inside one named stage of a run (load, pool, split, calibrate,
// combine, train, predict, evaluate, write).
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

// Keys of the JSON config file (relative paths resolve against the file's
// directory):
//   embeddings        list of BFVE sentence-embedding files, one per layer
//   tokens            list of BFVT token-embedding files, one per layer
//   labels            gold labels CSV
//   guidance_a        first backend CSV (zero-shot-like)
//   guidance_b        optional second backend CSV (seeded-topic-like)
//   guidance_a_probability / guidance_b_probability
//                     true: values already in [0, 1]; false: min-max scaled
//   output_dir        artifact directory
//   pooling           cls | mean | tfidf (token input only)
//   calibration       flow | whiten | none
//   layers            layer indices to average (default depends on count)
//   calibrate_per_layer  calibrate each layer before averaging
//   omega, gamma, epochs, lr, batch, seed, threshold, test_fraction
//   hps, encoder_only, topic_loss (positive | symmetric)
//   flow_steps, flow_epochs, flow_lr, flow_batch
//   min_count, min_fraction, drop_categories
//   gamma_grid, omega_grid  (sweep)
struct RunConfig {
    std::vector<fs::path> embeddings;
    std::vector<fs::path> tokens;
    fs::path labels;
    fs::path guidance_a;
    fs::path guidance_b;
    bool guidance_a_probability = true;
    bool guidance_b_probability = false;
    fs::path output_dir = "bfv_out";

    std::string pooling = "mean";
    std::string calibration = "flow";
    std::vector<int> layers;
    bool calibrate_per_layer = true;

    double omega = guidance::kDefaultOmega;
    double gamma = 1.0;
    int epochs = 10;
    double lr = 1e-3;
    Index batch = 64;
    std::optional<std::uint64_t> seed;
    double threshold = vae::kDefaultThreshold;
    double test_fraction = 0.2;
    bool hps = true;
    bool encoder_only = false;
    std::string topic_loss = "positive";

    int flow_steps = 16;
    int flow_epochs = 5;
    double flow_lr = 1e-3;
    Index flow_batch = 256;

    ingest::CategoryFilter filter;

    std::vector<double> gamma_grid = {0.1, 0.5, 1.0, 2.0, 5.0, 20.0};
    std::vector<double> omega_grid = {0.0, 0.25, 0.5, 0.75, 1.0};

    std::uint64_t effective_seed() const { return seed.value_or(0); }
};

// Command-line values that take precedence over the file.
struct Overrides {
    std::optional<double> gamma;
    std::optional<double> omega;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> pooling;
    std::optional<std::string> calibration;
    std::optional<int> epochs;
};

RunConfig parse_config(const std::string& json_text, const fs::path& base_dir = {});
RunConfig load_config(const fs::path& path);
// Flags first, then file values, then BFV_SEED for the seed.
void apply_overrides(RunConfig& cfg, const Overrides& ov);
void validate(const RunConfig& cfg);

std::string config_json(const RunConfig& cfg);
std::string config_digest(const RunConfig& cfg);
// "provenance: config=<digest> seed=<seed>"
std::string provenance_line(const RunConfig& cfg);

std::uint64_t fnv1a64(const std::string& bytes);

// Everything upstream of the VAE; independent of γ and ω, so a sweep
// computes it once.
struct Prepared {
    ingest::LabelMatrix labels;
    guidance::GuidanceMatrix backend_a;
    std::optional<guidance::GuidanceMatrix> backend_b;
    ingest::Split split;
    ingest::EmbeddingMatrix calibrated;
    // Extra views for the ablation harness.
    std::optional<Tensor> raw_mean;
    std::optional<Tensor> calibrated_mean;
    std::optional<Tensor> calibrated_tfidf;
};

struct PrepareOptions {
    bool ablation_views = false;
    // Writes calibrated.bfve and fitted calibration models.
    std::optional<fs::path> artifact_dir;
    std::string provenance;
};

Prepared prepare(const RunConfig& cfg, const PrepareOptions& options = {});

guidance::GuidanceMatrix combined_guidance(const Prepared& p, double omega);

vae::LossConfig loss_config(const RunConfig& cfg, double gamma);
vae::TrainOptions train_options(const RunConfig& cfg);

struct PointResult {
    vae::TrainResult trained;
    vae::Prediction prediction;  // test rows
    metrics::MetricsReport report;
};

PointResult run_point(const Prepared& p, const RunConfig& cfg, double gamma, double omega);

struct RunResult {
    Prepared prepared;
    PointResult point;
    fs::path output_dir;
};

// pool → calibrate → combine → train → predict → evaluate, writing every
// artifact into cfg.output_dir. Failures raise StageError; artifacts
// written before the failure are kept.
RunResult run(const RunConfig& cfg);

struct SweepRow {
    double gamma = 0.0;
    double omega = 0.0;
    std::optional<metrics::MetricsReport> report;
    std::string status = "ok";
};

std::vector<SweepRow> sweep(const RunConfig& cfg, const std::vector<double>& gammas,
                            const std::vector<double>& omegas);
void write_sweep_table(std::ostream& out, const std::vector<SweepRow>& rows,
                       const std::string& comment = {});

struct AblationRow {
    int stage = 0;
    std::string name;
    std::optional<metrics::MetricsReport> report;
    std::string status = "ok";
};

std::string ablation_stage_name(int stage);
std::vector<AblationRow> ablate(const RunConfig& cfg);
void write_ablation_table(std::ostream& out, const std::vector<AblationRow>& rows,
                          const std::string& comment = {});

// Shortest round-trip decimal form.
std::string format_number(double v);

} // namespace bfv::pipeline

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "bfv/diffcore/adamw.hpp"
#include "bfv/diffcore/graph.hpp"
#include "bfv/guidance.hpp"

namespace bfv::vae {

using diff::Graph;
using diff::Index;
using diff::Tensor;
using diff::Var;

struct VaeDims {
    Index input = 0;   // V
    Index topics = 0;  // M
    Index hidden1 = 512;
    Index hidden2 = 256;
};

// Encoder: V → h1 → h2 blocks, then μ and log σ² heads (h2 → M).
// Decoder: M → h2 → h1 blocks, then an h1 → V head.
struct VaeModel {
    VaeDims dims;
    diff::ParamSet params;
};

VaeModel vae_init(const VaeDims& dims, std::uint64_t seed, bool zero_heads = false);

enum class TopicLoss {
    positive_only,  // −T·ln σ(μ), the default
    symmetric,      // adds −(1 − T)·ln(1 − σ(μ))
};

// γ is the only free weight: α = 0.1·√γ weights the KL term and
// η = 0.1·γ·M weights the topic term. With HPS on, α is divided by 10 in
// the first epoch and η halved in the last (applied as ×0.1 and ×0.5).
struct LossConfig {
    double gamma = 1.0;
    Index topics = 0;
    bool hps = true;
    bool use_reconstruction = true;
    bool use_kld = true;
    TopicLoss topic_loss = TopicLoss::positive_only;

    double alpha() const;
    double eta() const;
    double effective_alpha(int epoch, int total_epochs) const;
    double effective_eta(int epoch, int total_epochs) const;
};

struct LossTerms {
    double total = 0.0;
    double reconstruction = 0.0;
    double kld = 0.0;
    double topic = 0.0;
    double effective_alpha = 0.0;
    double effective_eta = 0.0;
};

struct LossVars {
    Var total;
    Var reconstruction;
    Var kld;
    Var topic;
    double effective_alpha = 0.0;
    double effective_eta = 0.0;
};

struct Encoded {
    Tensor mu;
    Tensor logvar;
};

struct EncodedVars {
    Var mu;
    Var logvar;
};

EncodedVars encode(Graph& g, const diff::ParamSet& params, Var e);
Var decode(Graph& g, const diff::ParamSet& params, Var z);
Var reparameterize(Graph& g, Var mu, Var logvar, const Tensor& noise);

Encoded encode(const VaeModel& model, const Tensor& e);
Tensor decode(const VaeModel& model, const Tensor& z);
Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& noise);

// Individual terms, each averaged over the batch.
//   L_R   = mean over B·V of (E − Ê)²
//   L_KLD = mean over samples of ½·Σ_j (μ² + e^{logvar} − logvar − 1)
//   L_T   = −1/(B·M) · Σ T·ln σ(μ)
// total = L_R + α_eff·L_KLD + η_eff·L_T (terms disabled in cfg drop out).
LossVars loss(Graph& g, Var e, std::optional<Var> e_hat, Var mu, Var logvar, const Tensor& t,
              const LossConfig& cfg, int epoch, int total_epochs);
LossTerms loss(const Tensor& e, const Tensor& e_hat, const Tensor& mu, const Tensor& logvar,
               const Tensor& t, const LossConfig& cfg, int epoch, int total_epochs);

// Full model objective on one batch with injected noise.
LossVars model_loss(Graph& g, const diff::ParamSet& params, const Tensor& e, const Tensor& t,
                    const Tensor& noise, const LossConfig& cfg, int epoch, int total_epochs);

struct TrainOptions {
    double lr = 1e-3;
    int epochs = 10;
    Index batch = 64;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;
    Index hidden1 = 512;
    Index hidden2 = 256;
    bool zero_heads = false;
};

struct EpochStats {
    double total = 0.0;
    double reconstruction = 0.0;
    double kld = 0.0;
    double topic = 0.0;
};

struct TrainResult {
    VaeModel model;
    std::vector<EpochStats> trace;
};

TrainResult train(const Tensor& e, const guidance::GuidanceMatrix& t, const LossConfig& cfg,
                  const TrainOptions& options);

struct Prediction {
    Tensor probabilities;    // σ(μ)
    Eigen::MatrixXi binary;  // probabilities > threshold
};

inline constexpr double kDefaultThreshold = 0.5;

Prediction predict(const VaeModel& model, const Tensor& e, double threshold = kDefaultThreshold);
// Thresholds a score matrix directly (the backend-only baseline).
Prediction threshold_scores(const Tensor& scores, double threshold = kDefaultThreshold);

// Stage 1 thresholds the guidance; 2 trains the encoder on L_T alone over
// uncalibrated mean-pooled embeddings; 3 does the same on calibrated ones;
// 4 adds reconstruction and KL terms; 5 swaps in tf-idf pooling; 6 turns
// on hyper-parameter scheduling.
struct AblationInputs {
    const guidance::GuidanceMatrix* guidance = nullptr;
    std::optional<Tensor> raw_mean;
    std::optional<Tensor> calibrated_mean;
    std::optional<Tensor> calibrated_tfidf;
    LossConfig loss;
    TrainOptions train;
    std::vector<Index> train_rows;  // empty: every row
    std::vector<Index> eval_rows;   // empty: every row
};

inline constexpr int kAblationStages = 6;

LossConfig ablation_loss_config(int stage, const LossConfig& base);
Prediction ablation_variant(int stage, const AblationInputs& inputs);

// BFVM: "BFVM", u32 version, u32 V, M, h1, h2, parameters in name order as
// f32 row-major.
void save_vae(const std::filesystem::path& path, const VaeModel& model);
VaeModel load_vae(const std::filesystem::path& path);

} // namespace bfv::vae

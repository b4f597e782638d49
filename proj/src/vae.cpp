#include "bfv/vae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "bfv/diffcore/layers.hpp"
#include "bfv/ingest/formats.hpp"
#include "bfv/ingest/preprocess.hpp"

namespace bfv::vae {

namespace {

constexpr Index kPredictChunk = 1024;

Tensor gaussian_noise(Index rows, Index cols, std::mt19937_64& rng)
{
    std::normal_distribution<double> dist(0.0, 1.0);
    Tensor t(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c)
            t(r, c) = dist(rng);
    return t;
}

void check_width(const VaeModel& model, const Tensor& e)
{
    if (e.cols() != model.dims.input)
        throw DimensionError("VAE expects width " + std::to_string(model.dims.input) + ", got " +
                             diff::shape_string(e));
}

std::vector<Index> all_rows(Index n)
{
    std::vector<Index> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), Index{0});
    return rows;
}

} // namespace

VaeModel vae_init(const VaeDims& dims, std::uint64_t seed, bool zero_heads)
{
    if (dims.input < 1 || dims.topics < 1 || dims.hidden1 < 1 || dims.hidden2 < 1)
        throw ContractError("vae_init: all dimensions must be positive");
    VaeModel model;
    model.dims = dims;
    std::mt19937_64 rng(seed);
    auto& p = model.params;
    diff::add_mlp_block(p, "enc.block1", dims.input, dims.hidden1, rng);
    diff::add_mlp_block(p, "enc.block2", dims.hidden1, dims.hidden2, rng);
    diff::add_linear(p, "enc.mu", dims.hidden2, dims.topics, rng, zero_heads);
    diff::add_linear(p, "enc.logvar", dims.hidden2, dims.topics, rng, zero_heads);
    diff::add_mlp_block(p, "dec.block1", dims.topics, dims.hidden2, rng);
    diff::add_mlp_block(p, "dec.block2", dims.hidden2, dims.hidden1, rng);
    diff::add_linear(p, "dec.out", dims.hidden1, dims.input, rng, zero_heads);
    return model;
}

double LossConfig::alpha() const
{
    return 0.1 * std::sqrt(gamma);
}

double LossConfig::eta() const
{
    return 0.1 * gamma * static_cast<double>(topics);
}

double LossConfig::effective_alpha(int epoch, [[maybe_unused]] int total_epochs) const
{
    if (!use_kld)
        return 0.0;
    return hps && epoch == 0 ? alpha() * 0.1 : alpha();
}

double LossConfig::effective_eta(int epoch, int total_epochs) const
{
    return hps && epoch == total_epochs - 1 ? eta() * 0.5 : eta();
}

EncodedVars encode(Graph& g, const diff::ParamSet& params, Var e)
{
    Var h = diff::mlp_block(g, params, "enc.block1", e);
    h = diff::mlp_block(g, params, "enc.block2", h);
    return {diff::linear(g, params, "enc.mu", h), diff::linear(g, params, "enc.logvar", h)};
}

Var decode(Graph& g, const diff::ParamSet& params, Var z)
{
    Var h = diff::mlp_block(g, params, "dec.block1", z);
    h = diff::mlp_block(g, params, "dec.block2", h);
    return diff::linear(g, params, "dec.out", h);
}

Var reparameterize(Graph& g, Var mu, Var logvar, const Tensor& noise)
{
    const Tensor& m = g.value(mu);
    diff::require_shape(noise, m.rows(), m.cols(), "reparameterize noise");
    Var sigma = g.exp(g.scale(logvar, 0.5));
    return g.add(mu, g.mul(sigma, g.constant(noise)));
}

Encoded encode(const VaeModel& model, const Tensor& e)
{
    check_width(model, e);
    Graph g(false);
    EncodedVars out = encode(g, model.params, g.constant(e));
    return {g.value(out.mu), g.value(out.logvar)};
}

Tensor decode(const VaeModel& model, const Tensor& z)
{
    if (z.cols() != model.dims.topics)
        throw DimensionError("decode: expected width " + std::to_string(model.dims.topics));
    Graph g(false);
    return g.value(decode(g, model.params, g.constant(z)));
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& noise)
{
    diff::require_shape(logvar, mu.rows(), mu.cols(), "reparameterize logvar");
    diff::require_shape(noise, mu.rows(), mu.cols(), "reparameterize noise");
    return mu.array() + (0.5 * logvar.array()).exp() * noise.array();
}

LossVars loss(Graph& g, Var e, std::optional<Var> e_hat, Var mu, Var logvar, const Tensor& t,
              const LossConfig& cfg, int epoch, int total_epochs)
{
    if (epoch < 0 || epoch >= total_epochs)
        throw ContractError("loss: epoch outside [0, total_epochs)");
    const Tensor& m = g.value(mu);
    diff::require_shape(t, m.rows(), m.cols(), "topic guidance");
    guidance::require_unit_interval(t, "topic guidance");
    diff::require_shape(g.value(logvar), m.rows(), m.cols(), "logvar");
    const double batch = static_cast<double>(m.rows());
    const double cells = batch * static_cast<double>(m.cols());

    LossVars out;
    out.effective_alpha = cfg.effective_alpha(epoch, total_epochs);
    out.effective_eta = cfg.effective_eta(epoch, total_epochs);

    if (e_hat) {
        diff::require_shape(g.value(*e_hat), g.value(e).rows(), g.value(e).cols(),
                            "reconstruction");
        out.reconstruction = g.mean(g.square(g.sub(e, *e_hat)));
    } else {
        out.reconstruction = g.constant(Tensor::Zero(1, 1));
    }

    Var kl_cells = g.add_scalar(g.sub(g.add(g.square(mu), g.exp(logvar)), logvar), -1.0);
    out.kld = g.scale(g.sum(kl_cells), 0.5 / batch);

    Var tv = g.constant(t);
    Var topic_sum = g.sum(g.mul(tv, g.log_sigmoid(mu)));
    if (cfg.topic_loss == TopicLoss::symmetric) {
        Var neg = g.constant((1.0 - t.array()).matrix());
        topic_sum = g.add(topic_sum, g.sum(g.mul(neg, g.log_sigmoid(g.scale(mu, -1.0)))));
    }
    out.topic = g.scale(topic_sum, -1.0 / cells);

    Var total = g.scale(out.topic, out.effective_eta);
    if (cfg.use_kld)
        total = g.add(total, g.scale(out.kld, out.effective_alpha));
    if (cfg.use_reconstruction && e_hat)
        total = g.add(total, out.reconstruction);
    out.total = total;
    return out;
}

LossTerms loss(const Tensor& e, const Tensor& e_hat, const Tensor& mu, const Tensor& logvar,
               const Tensor& t, const LossConfig& cfg, int epoch, int total_epochs)
{
    Graph g(false);
    LossVars v = loss(g, g.constant(e), g.constant(e_hat), g.constant(mu), g.constant(logvar), t,
                      cfg, epoch, total_epochs);
    return {g.scalar(v.total), g.scalar(v.reconstruction), g.scalar(v.kld), g.scalar(v.topic),
            v.effective_alpha, v.effective_eta};
}

LossVars model_loss(Graph& g, const diff::ParamSet& params, const Tensor& e, const Tensor& t,
                    const Tensor& noise, const LossConfig& cfg, int epoch, int total_epochs)
{
    Var ev = g.constant(e);
    EncodedVars enc = encode(g, params, ev);
    std::optional<Var> e_hat;
    if (cfg.use_reconstruction) {
        Var z = reparameterize(g, enc.mu, enc.logvar, noise);
        e_hat = decode(g, params, z);
    }
    return loss(g, ev, e_hat, enc.mu, enc.logvar, t, cfg, epoch, total_epochs);
}

TrainResult train(const Tensor& e, const guidance::GuidanceMatrix& t, const LossConfig& cfg_in,
                  const TrainOptions& options)
{
    if (e.rows() != t.n())
        throw ContractError("train: embeddings have " + std::to_string(e.rows()) +
                            " rows but guidance has " + std::to_string(t.n()));
    if (e.rows() < 1)
        throw ContractError("train: no documents");
    if (options.batch < 1)
        throw ContractError("train: batch must be positive");
    if (options.epochs < 0)
        throw ContractError("train: epochs must be non-negative");
    diff::require_finite(e, "train embeddings");
    guidance::require_unit_interval(t.values, "train guidance");

    LossConfig cfg = cfg_in;
    cfg.topics = t.m();

    VaeDims dims{e.cols(), t.m(), options.hidden1, options.hidden2};
    TrainResult result;
    result.model = vae_init(dims, options.seed, options.zero_heads);
    auto& params = result.model.params;

    diff::AdamWOptions opt;
    opt.lr = options.lr;
    opt.weight_decay = options.weight_decay;
    diff::AdamWState state = diff::adamw_init(params, opt);

    // Separate streams so shuffling does not depend on the noise draw count.
    std::mt19937_64 shuffle_rng(options.seed ^ 0x5348554646ULL);
    std::mt19937_64 noise_rng(options.seed ^ 0x4e4f495345ULL);

    const Index n = e.rows();
    std::vector<Index> order = all_rows(n);
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        EpochStats stats;
        Index step = 0;
        for (Index start = 0; start < n; start += options.batch, ++step) {
            const Index count = std::min(options.batch, n - start);
            std::vector<Index> rows(order.begin() + start, order.begin() + start + count);
            const Tensor eb = ingest::take_rows(e, rows);
            const Tensor tb = ingest::take_rows(t.values, rows);
            const Tensor noise = cfg.use_reconstruction ? gaussian_noise(count, dims.topics, noise_rng)
                                                        : Tensor::Zero(count, dims.topics);
            Graph g;
            LossVars lv = model_loss(g, params, eb, tb, noise, cfg, epoch, options.epochs);
            const double total = g.scalar(lv.total);
            if (!std::isfinite(total))
                throw TrainingError("VAE loss is NaN at epoch " + std::to_string(epoch) +
                                    ", step " + std::to_string(step));
            const double w = static_cast<double>(count) / static_cast<double>(n);
            stats.total += w * total;
            stats.reconstruction += w * g.scalar(lv.reconstruction);
            stats.kld += w * g.scalar(lv.kld);
            stats.topic += w * g.scalar(lv.topic);
            diff::adamw_step(params, diff::backward(g, lv.total, params), state);
        }
        result.trace.push_back(stats);
    }
    return result;
}

Prediction threshold_scores(const Tensor& scores, double threshold)
{
    Prediction p;
    p.probabilities = scores;
    p.binary = (scores.array() > threshold).cast<int>();
    return p;
}

Prediction predict(const VaeModel& model, const Tensor& e, double threshold)
{
    check_width(model, e);
    Tensor mu(e.rows(), model.dims.topics);
    for (Index start = 0; start < e.rows(); start += kPredictChunk) {
        const Index count = std::min(kPredictChunk, e.rows() - start);
        mu.middleRows(start, count) = encode(model, e.middleRows(start, count)).mu;
    }
    Tensor prob = mu.unaryExpr([](double v) {
        return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    });
    return threshold_scores(prob, threshold);
}

LossConfig ablation_loss_config(int stage, const LossConfig& base)
{
    if (stage < 1 || stage > kAblationStages)
        throw ContractError("ablation stage must be in 1..6");
    LossConfig cfg = base;
    const bool encoder_only = stage == 2 || stage == 3;
    cfg.use_reconstruction = !encoder_only;
    cfg.use_kld = !encoder_only;
    cfg.hps = stage == 6;
    return cfg;
}

Prediction ablation_variant(int stage, const AblationInputs& in)
{
    if (stage < 1 || stage > kAblationStages)
        throw ContractError("ablation stage must be in 1..6");
    if (in.guidance == nullptr)
        throw ContractError("ablation stage " + std::to_string(stage) + " requires guidance");
    const auto& t = *in.guidance;
    const std::vector<Index> train_rows = in.train_rows.empty() ? all_rows(t.n()) : in.train_rows;
    const std::vector<Index> eval_rows = in.eval_rows.empty() ? all_rows(t.n()) : in.eval_rows;

    if (stage == 1)
        return threshold_scores(ingest::take_rows(t.values, eval_rows));

    const std::optional<Tensor>* source = nullptr;
    const char* what = "";
    switch (stage) {
    case 2: source = &in.raw_mean; what = "uncalibrated mean-pooled embeddings"; break;
    case 3:
    case 4: source = &in.calibrated_mean; what = "calibrated mean-pooled embeddings"; break;
    default: source = &in.calibrated_tfidf; what = "calibrated tf-idf-pooled embeddings"; break;
    }
    if (!source->has_value())
        throw ContractError("ablation stage " + std::to_string(stage) + " requires " + what);
    const Tensor& e = **source;
    if (e.rows() != t.n())
        throw ContractError("ablation: embeddings and guidance row counts differ");

    const LossConfig cfg = ablation_loss_config(stage, in.loss);
    const TrainResult trained =
        train(ingest::take_rows(e, train_rows), guidance::take_rows(t, train_rows), cfg, in.train);
    return predict(trained.model, ingest::take_rows(e, eval_rows));
}

void save_vae(const std::filesystem::path& path, const VaeModel& model)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open for writing: " + path.string());
    using namespace ingest::wire;
    put_magic(out, "BFVM");
    put_u32(out, ingest::kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(model.dims.input));
    put_u32(out, static_cast<std::uint32_t>(model.dims.topics));
    put_u32(out, static_cast<std::uint32_t>(model.dims.hidden1));
    put_u32(out, static_cast<std::uint32_t>(model.dims.hidden2));
    for (const auto& [name, p] : model.params)
        put_matrix(out, p.value);
    if (!out)
        throw Error("write failed: " + path.string());
}

VaeModel load_vae(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open: " + path.string());
    using namespace ingest::wire;
    expect_magic(in, "BFVM");
    VaeDims dims;
    dims.input = get_u32(in, "V");
    dims.topics = get_u32(in, "M");
    dims.hidden1 = get_u32(in, "h1");
    dims.hidden2 = get_u32(in, "h2");
    VaeModel model = vae_init(dims, 0);
    for (auto& [name, p] : model.params)
        p.value = get_matrix(in, p.value.rows(), p.value.cols(), name);
    expect_eof(in, path.string());
    return model;
}

} // namespace bfv::vae

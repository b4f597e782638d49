#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <Eigen/QR>

#include "bfv/calib/flow.hpp"
#include "bfv/calib/whitening.hpp"
#include "bfv/errors.hpp"

using namespace bfv;
using namespace bfv::calib;

namespace {

void perturb(FlowModel& m, std::uint64_t seed, double scale)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, scale);
    for (auto& [name, p] : m.params)
        for (Index i = 0; i < p.value.size(); ++i)
            p.value.data()[i] += dist(rng);
}

Tensor gaussian(Index n, Index v, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    Tensor x(n, v);
    for (Index i = 0; i < x.size(); ++i)
        x.data()[i] = dist(rng);
    return x;
}

// log|det J| from central differences and a full LU determinant.
double brute_log_det(const FlowModel& m, const Tensor& row)
{
    const Index v = row.cols();
    const double h = 1e-5;
    Eigen::MatrixXd jac(v, v);
    for (Index j = 0; j < v; ++j) {
        Tensor plus = row, minus = row;
        plus(0, j) += h;
        minus(0, j) -= h;
        const Tensor d = (flow_forward(m, plus).z - flow_forward(m, minus).z) / (2 * h);
        jac.col(j) = d.row(0).transpose();
    }
    return std::log(std::abs(jac.determinant()));
}

} // namespace

TEST_CASE("fresh flow is a pure permutation")
{
    const auto m = flow_init(5, 16, 3);
    const Tensor x = gaussian(10, 5, 1);
    const auto out = flow_forward(m, x);
    CHECK(out.log_det.cwiseAbs().maxCoeff() == 0.0);
    Eigen::VectorXd a = x.row(0).transpose(), b = out.z.row(0).transpose();
    std::sort(a.data(), a.data() + a.size());
    std::sort(b.data(), b.data() + b.size());
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    CHECK(flow_hidden_width(4) == 64);
    CHECK(flow_hidden_width(40) == 80);
}

TEST_CASE("hand-set doubling coupling")
{
    auto m = flow_init(2, 1, 1);
    m.permutations[0] = {0, 1};
    m.params.value(flow_step_prefix(0) + ".head.bias")(0, 0) = 2.0 * std::atanh(std::log(2.0) / 2.0);
    Tensor x(1, 2);
    x << 0.0, 1.0;
    const auto out = flow_forward(m, x);
    CHECK(out.z(0, 0) == 0.0);
    CHECK(out.z(0, 1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(out.log_det(0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    const double nll = 0.5 * (2.0 * std::log(2.0 * M_PI) + 0.0 + 4.0) - std::log(2.0);
    CHECK(flow_nll(m, x) == doctest::Approx(nll).epsilon(1e-12));
    CHECK(flow_nll(flow_init(3, 2, 1), Tensor::Zero(1, 3)) ==
          doctest::Approx(0.5 * 3.0 * std::log(2.0 * M_PI)).epsilon(1e-12));
    CHECK_THROWS_AS(flow_init(1, 16, 1), ContractError);
    CHECK(flow_init(6, 4, 9).permutations == flow_init(6, 4, 9).permutations);
}

TEST_CASE("flow inverse reconstructs inputs before and after training")
{
    for (Index v : {2, 3, 4, 7}) {
        auto m = flow_init(v, 16, 10 + static_cast<std::uint64_t>(v));
        perturb(m, 5, 0.3);
        const Tensor x = gaussian(64, v, 2);
        CHECK((flow_inverse(m, flow_forward(m, x).z) - x).cwiseAbs().maxCoeff() < 1e-5);
    }
    const Tensor x = gaussian(300, 4, 3) * 2.0;
    FlowTrainOptions opt;
    opt.epochs = 5;
    opt.batch = 64;
    auto trained = flow_train(flow_init(4, 16, 1), x, opt);
    CHECK((flow_inverse(trained.model, flow_forward(trained.model, x).z) - x).cwiseAbs().maxCoeff() <
          1e-5);
}

TEST_CASE("flow log-determinant matches a brute-force Jacobian")
{
    for (Index v : {2, 3, 4}) {
        auto m = flow_init(v, 16, 20 + static_cast<std::uint64_t>(v));
        perturb(m, 7 + static_cast<std::uint64_t>(v), 0.2);
        const Tensor x = gaussian(5, v, 4);
        const auto out = flow_forward(m, x);
        for (Index i = 0; i < x.rows(); ++i) {
            const double brute = brute_log_det(m, x.row(i));
            CAPTURE(v);
            CHECK(std::abs(out.log_det(i) - brute) <= 1e-3 * std::max(1.0, std::abs(brute)));
        }
    }
}

TEST_CASE("graph and direct flow forward agree")
{
    auto m = flow_init(4, 4, 2);
    perturb(m, 1, 0.2);
    const Tensor x = gaussian(6, 4, 5);
    diff::Graph g;
    const auto vars = flow_forward(g, m, g.constant(x));
    const auto direct = flow_forward(m, x);
    CHECK((g.value(vars.z) - direct.z).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g.value(vars.log_det).col(0) - direct.log_det).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(g.value(flow_nll(g, m, g.constant(x)))(0, 0) - flow_nll(m, x)) < 1e-12);
}

TEST_CASE("training lowers the negative log-likelihood")
{
    Tensor x = gaussian(500, 3, 6);
    x.col(0) *= 5.0;
    x.col(1) = x.col(1) * 0.2 + x.col(0);
    FlowTrainOptions opt;
    opt.epochs = 5;
    opt.batch = 100;
    const auto r = flow_train(flow_init(3, 8, 2), x, opt);
    REQUIRE(r.epoch_nll.size() == 5);
    CHECK(r.epoch_nll.back() < r.initial_nll);
    const auto again = flow_train(flow_init(3, 8, 2), x, opt);
    CHECK(again.epoch_nll == r.epoch_nll);
}

TEST_CASE("trained flow standardizes an anisotropic Gaussian")
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> dist;
    Tensor g(8, 8);
    for (Index i = 0; i < g.size(); ++i)
        g.data()[i] = dist(rng);
    Eigen::HouseholderQR<Tensor> qr(g);
    const Tensor rot = qr.householderQ();
    Eigen::VectorXd sd(8);
    for (Index k = 0; k < 8; ++k)
        sd(k) = std::pow(100.0, 0.5 * (static_cast<double>(k) / 7.0 - 0.5));
    const Tensor x = gaussian(2000, 8, 5) * sd.asDiagonal() * rot.transpose();
    FlowTrainOptions opt;
    opt.seed = 2;
    const auto r = flow_train(flow_init(8, 16, 2), x, opt);
    const Tensor z = flow_forward(r.model, x).z;
    const Eigen::RowVectorXd mean = z.colwise().mean();
    const Eigen::VectorXd var = sample_covariance(z).diagonal();
    CHECK(mean.cwiseAbs().maxCoeff() < 0.1);
    CHECK((var.array() - 1.0).abs().maxCoeff() < 0.2);
}

TEST_CASE("zero epochs leave the model unchanged")
{
    const auto m = flow_init(4, 2, 1);
    FlowTrainOptions opt;
    opt.epochs = 0;
    opt.batch = 4;
    CHECK(flow_train(m, gaussian(10, 4, 1), opt).model.params == m.params);
}

TEST_CASE("flow save and load")
{
    auto m = flow_init(5, 3, 4);
    perturb(m, 2, 0.1);
    const auto p = std::filesystem::temp_directory_path() / "bfv_test_flow.bfvf";
    save_flow(p, m);
    const auto back = load_flow(p);
    CHECK(back.dim == 5);
    CHECK(back.steps == 3);
    CHECK(back.permutations == m.permutations);
    const Tensor x = gaussian(4, 5, 1);
    // Parameters are stored as f32.
    CHECK((flow_forward(back, x).z - flow_forward(m, x).z).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("whitening")
{
    std::mt19937_64 rng(8);
    std::normal_distribution<double> dist;
    Tensor x(2000, 2);
    for (Index i = 0; i < x.rows(); ++i) {
        x(i, 0) = 2.0 * dist(rng) + 3.0;
        x(i, 1) = dist(rng) - 1.0;
    }
    const auto w = whiten_fit(x);
    const Tensor z = whiten_apply(w, x);
    CHECK((sample_covariance(z) - Tensor::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(z.colwise().mean().cwiseAbs().maxCoeff() < 1e-10);

    Tensor degenerate(50, 3);
    degenerate.col(0) = gaussian(50, 1, 1);
    degenerate.col(1) = 2.0 * degenerate.col(0);
    degenerate.col(2) = gaussian(50, 1, 2);
    CHECK(whiten_fit(degenerate).rank() == 2);
    CHECK_THROWS_AS(whiten_fit(Tensor(Tensor::Zero(1, 3))), ContractError);
    CHECK_THROWS_AS(whiten_apply(w, Tensor(Tensor::Zero(2, 3))), DimensionError);
}

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <unistd.h>

#include "doctest.h"
#include "graspkit/nn.hpp"

using namespace gk;

namespace {

// Loss and analytic finite-difference gradient scaffold: L = sum(out^2).
double scalar_loss(const Net& net, const Mat& x, Mat* out_grad, ForwardCache* cache) {
    const Mat y = net.forward(x, cache);
    if (out_grad) *out_grad = 2.0 * y;
    if (cache) cache->output = y;
    return y.squaredNorm();
}

void check_param_gradients(Net& net, const Mat& x, double h = 1e-5, double tol = 1e-4) {
    ForwardCache cache;
    Mat out_grad;
    scalar_loss(net, x, &out_grad, &cache);
    std::vector<LayerGrad> grads;
    net.backward(cache, out_grad, &grads);

    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        Layer& layer = net.layers()[l];
        if (!layer.has_params()) continue;
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
            const double saved = layer.weight.data()[i];
            layer.weight.data()[i] = saved + h;
            const double up = scalar_loss(net, x, nullptr, nullptr);
            layer.weight.data()[i] = saved - h;
            const double down = scalar_loss(net, x, nullptr, nullptr);
            layer.weight.data()[i] = saved;
            const double fd = (up - down) / (2 * h);
            const double an = grads[l].weight.data()[i];
            CHECK(std::abs(fd - an) <= tol * std::max(1.0, std::abs(fd)));
        }
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
            const double saved = layer.bias(i);
            layer.bias(i) = saved + h;
            const double up = scalar_loss(net, x, nullptr, nullptr);
            layer.bias(i) = saved - h;
            const double down = scalar_loss(net, x, nullptr, nullptr);
            layer.bias(i) = saved;
            const double fd = (up - down) / (2 * h);
            CHECK(std::abs(fd - grads[l].bias(i)) <= tol * std::max(1.0, std::abs(fd)));
        }
    }
}

void check_input_gradient(const Net& net, const Mat& x, double h = 1e-5, double tol = 1e-4) {
    ForwardCache cache;
    Mat out_grad;
    scalar_loss(net, x, &out_grad, &cache);
    std::vector<LayerGrad> grads;
    const Mat dx = net.backward(cache, out_grad, &grads);
    Mat probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double saved = probe.data()[i];
        probe.data()[i] = saved + h;
        const double up = scalar_loss(net, probe, nullptr, nullptr);
        probe.data()[i] = saved - h;
        const double down = scalar_loss(net, probe, nullptr, nullptr);
        probe.data()[i] = saved;
        const double fd = (up - down) / (2 * h);
        CHECK(std::abs(fd - dx.data()[i]) <= tol * std::max(1.0, std::abs(fd)));
    }
}

Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("layer forward semantics") {
    Net relu({Layer::relu()});
    Mat x(1, 3);
    x << -1, 0, 2;
    CHECK(relu.forward(x) == (Mat(1, 3) << 0, 0, 2).finished());

    Net softmax({Layer::softmax_rows()});
    Mat z(1, 2);
    z << 0, 0;
    CHECK(softmax.forward(z).isApprox((Mat(1, 2) << 0.5, 0.5).finished(), 1e-12));

    Net pool({Layer::maxpool_rows()});
    Mat p(3, 2);
    p << 1, 5, 4, 2, 3, 3;
    CHECK(pool.forward(p) == (Mat(1, 2) << 4, 5).finished());
}

TEST_CASE("softmax rows sum to one") {
    std::mt19937_64 rng(1);
    Net softmax({Layer::softmax_rows()});
    const Mat y = softmax.forward(random_mat(7, 5, rng));
    for (Eigen::Index r = 0; r < y.rows(); ++r)
        CHECK(y.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dense layer gradient matches the closed form") {
    // L = ||W x||^2 with zero bias: dL/dW = 2 (W x) x^T.
    std::mt19937_64 rng(2);
    Net net({Layer::dense(4, 3)});
    net.init_params(rng);
    net.layers()[0].bias.setZero();
    const Mat x = random_mat(1, 4, rng);

    ForwardCache cache;
    const Mat y = net.forward(x, &cache);
    std::vector<LayerGrad> grads;
    net.backward(cache, Mat(2.0 * y), &grads);

    const Mat expected = 2.0 * y.transpose() * x;  // (out x 1) * (1 x in)
    CHECK(grads[0].weight.isApprox(expected, 1e-12));
    CHECK(grads[0].bias.isApprox(Vec(2.0 * y.transpose()), 1e-12));
}

TEST_CASE("finite-difference gradients per layer kind") {
    std::mt19937_64 rng(3);
    for (int inst = 0; inst < 10; ++inst) {
        Net dense({Layer::dense(5, 4), Layer::relu(), Layer::dense(4, 2)});
        dense.init_params(rng);
        const Mat x1 = random_mat(3, 5, rng);
        check_param_gradients(dense, x1);
        check_input_gradient(dense, x1);

        Net conv({Layer::pointwise_conv(3, 6), Layer::relu(), Layer::maxpool_rows()});
        conv.init_params(rng);
        check_param_gradients(conv, random_mat(8, 3, rng));

        Net soft({Layer::dense(4, 4), Layer::softmax_rows()});
        soft.init_params(rng);
        check_input_gradient(soft, random_mat(2, 4, rng));
    }
}

TEST_CASE("forward validates shapes and finiteness") {
    Net net({Layer::dense(3, 2)});
    std::mt19937_64 rng(4);
    net.init_params(rng);
    CHECK_THROWS_AS(net.forward(Mat::Zero(1, 4)), DomainError);
    Mat bad = Mat::Zero(1, 3);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(net.forward(bad), NumericError);
}

TEST_CASE("adam first step has magnitude lr") {
    std::mt19937_64 rng(5);
    Net net({Layer::dense(2, 2)});
    net.init_params(rng);
    const Mat before = net.layers()[0].weight;

    std::vector<LayerGrad> grads(1);
    grads[0].weight = random_mat(2, 2, rng);
    grads[0].bias = Vec::Zero(2);

    AdamState opt(1e-3);
    opt.step(net, grads);
    const Mat delta = net.layers()[0].weight - before;
    for (Eigen::Index i = 0; i < delta.size(); ++i) {
        if (std::abs(grads[0].weight.data()[i]) > 1e-6)
            CHECK(std::abs(delta.data()[i]) == doctest::Approx(1e-3).epsilon(1e-4));
    }
}

TEST_CASE("adam minimizes a quadratic") {
    // Single 1x1 dense on input 1: out = w + b, loss (out - 3)^2.
    Net net({Layer::dense(1, 1)});
    net.layers()[0].weight.setZero();
    net.layers()[0].bias.setZero();
    AdamState opt(0.05);
    Mat x = Mat::Ones(1, 1);
    for (int i = 0; i < 400; ++i) {
        ForwardCache cache;
        const Mat y = net.forward(x, &cache);
        Mat g(1, 1);
        g(0, 0) = 2.0 * (y(0, 0) - 3.0);
        std::vector<LayerGrad> grads;
        net.backward(cache, g, &grads);
        opt.step(net, grads);
    }
    CHECK(net.forward(x)(0, 0) == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("checkpoint round trip is exact") {
    std::mt19937_64 rng(6);
    Checkpoint cp;
    cp.nets["policy"] = Net({Layer::dense(3, 5), Layer::relu(), Layer::dense(5, 2)});
    cp.nets["policy"].init_params(rng);
    cp.nets["small"] = Net({Layer::pointwise_conv(2, 2)});
    cp.nets["small"].init_params(rng);
    cp.scalars["alpha"] = 0.8;
    cp.scalars["gamma"] = 0.99;
    cp.vectors["curve"] = {1.0, 0.5, 0.25};

    const std::string path =
        "/tmp/graspkit_unit_cp_" + std::to_string(::getpid()) + ".tnn";
    cp.save(path);
    const Checkpoint back = Checkpoint::load(path);

    REQUIRE(back.nets.size() == 2);
    for (const auto& [name, net] : cp.nets) {
        const Net& other = back.nets.at(name);
        REQUIRE(other.layers().size() == net.layers().size());
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
            CHECK(other.layers()[l].kind == net.layers()[l].kind);
            if (net.layers()[l].has_params()) {
                CHECK(other.layers()[l].weight == net.layers()[l].weight);
                CHECK(other.layers()[l].bias == net.layers()[l].bias);
            }
        }
    }
    CHECK(back.scalars == cp.scalars);
    CHECK(back.vectors == cp.vectors);

    // Corrupt the magic and expect a rejection.
    FILE* f = std::fopen(path.c_str(), "r+");
    REQUIRE(f != nullptr);
    std::fputs("XXXX", f);
    std::fclose(f);
    CHECK_THROWS_AS(Checkpoint::load(path), DataError);
    std::remove(path.c_str());
}

TEST_CASE("maxpool backward routes gradient to argmax rows") {
    Net pool({Layer::maxpool_rows()});
    Mat x(3, 2);
    x << 1, 5, 4, 2, 3, 3;
    ForwardCache cache;
    pool.forward(x, &cache);
    std::vector<LayerGrad> grads;
    Mat g(1, 2);
    g << 1.0, 2.0;
    const Mat dx = pool.backward(cache, g, &grads);
    Mat expected(3, 2);
    expected << 0, 2, 1, 0, 0, 0;
    CHECK(dx == expected);
}

}  // TEST_SUITE

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "graspkit/errors.hpp"

namespace gk {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Layer semantics over row-major batches (rows = samples/points):
//   Dense / PointwiseConv  y = x * W^T + b   (identical math; PointwiseConv
//                          documents per-point application on point sets)
//   Relu                   elementwise max(0, x)
//   SoftmaxRows            each row normalized to a probability vector
//   MaxPoolRows            R x C -> 1 x C column-wise max
enum class LayerKind : std::uint64_t {
    Dense = 0,
    PointwiseConv = 1,
    Relu = 2,
    SoftmaxRows = 3,
    MaxPoolRows = 4,
};

struct Layer {
    LayerKind kind = LayerKind::Relu;
    int in = 0, out = 0;
    Mat weight;  // out x in
    Vec bias;    // out

    bool has_params() const {
        return kind == LayerKind::Dense || kind == LayerKind::PointwiseConv;
    }
    static Layer dense(int in, int out);
    static Layer pointwise_conv(int in, int out);
    static Layer relu();
    static Layer softmax_rows();
    static Layer maxpool_rows();
};

struct LayerGrad {
    Mat weight;
    Vec bias;
};

struct ForwardCache {
    std::vector<Mat> inputs;  // input to each layer
    std::vector<std::vector<Eigen::Index>> argmax;  // per maxpool layer, per column
    Mat output;
};

// A plain layer stack. Forward checks the shape chain and finiteness of the
// output; backward needs the cache from the matching forward call.
class Net {
public:
    Net() = default;
    explicit Net(std::vector<Layer> layers) : layers_(std::move(layers)) {}

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }
    bool empty() const { return layers_.empty(); }

    Mat forward(const Mat& x, ForwardCache* cache = nullptr) const;
    // Returns dL/dx; fills one LayerGrad per layer (empty for parameterless).
    Mat backward(const ForwardCache& cache, const Mat& output_grad,
                 std::vector<LayerGrad>* grads) const;

    // He-style uniform init on all parameterized layers.
    void init_params(std::mt19937_64& rng);
    std::size_t param_count() const;

private:
    std::vector<Layer> layers_;
};

// Standard Adam with bias correction; moments are laid out per layer.
class AdamState {
public:
    explicit AdamState(double lr = 2e-3, double beta1 = 0.9, double beta2 = 0.999,
                       double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(Net& net, const std::vector<LayerGrad>& grads);
    std::int64_t steps_taken() const { return step_; }
    double learning_rate() const { return lr_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t step_ = 0;
    std::vector<LayerGrad> m_, v_;
};

// Parameter checkpoint: magic TNN1, named net table with per-layer kind and
// shape, named scalars, little-endian doubles throughout. Exact round-trip.
struct Checkpoint {
    std::map<std::string, Net> nets;
    std::map<std::string, double> scalars;
    std::map<std::string, std::vector<double>> vectors;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

}  // namespace gk

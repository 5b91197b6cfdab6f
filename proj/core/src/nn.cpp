#include "graspkit/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace gk {

Layer Layer::dense(int in, int out) {
    if (in < 1 || out < 1) throw DomainError("dense: widths must be positive");
    Layer l;
    l.kind = LayerKind::Dense;
    l.in = in;
    l.out = out;
    l.weight = Mat::Zero(out, in);
    l.bias = Vec::Zero(out);
    return l;
}

Layer Layer::pointwise_conv(int in, int out) {
    Layer l = dense(in, out);
    l.kind = LayerKind::PointwiseConv;
    return l;
}

Layer Layer::relu() {
    Layer l;
    l.kind = LayerKind::Relu;
    return l;
}

Layer Layer::softmax_rows() {
    Layer l;
    l.kind = LayerKind::SoftmaxRows;
    return l;
}

Layer Layer::maxpool_rows() {
    Layer l;
    l.kind = LayerKind::MaxPoolRows;
    return l;
}

namespace {

Mat softmax_rows_of(const Mat& x) {
    Mat y(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mx = x.row(r).maxCoeff();
        Eigen::RowVectorXd e = (x.row(r).array() - mx).exp();
        y.row(r) = e / e.sum();
    }
    return y;
}

}  // namespace

Mat Net::forward(const Mat& x, ForwardCache* cache) const {
    Mat cur = x;
    if (cache) {
        cache->inputs.clear();
        cache->argmax.clear();
    }
    for (const auto& layer : layers_) {
        if (cache) cache->inputs.push_back(cur);
        switch (layer.kind) {
            case LayerKind::Dense:
            case LayerKind::PointwiseConv: {
                if (cur.cols() != layer.in) {
                    throw DomainError("forward: shape mismatch (have " +
                                      std::to_string(cur.cols()) + ", want " +
                                      std::to_string(layer.in) + ")");
                }
                cur = (cur * layer.weight.transpose()).rowwise() + layer.bias.transpose();
                break;
            }
            case LayerKind::Relu:
                cur = cur.cwiseMax(0.0);
                break;
            case LayerKind::SoftmaxRows:
                cur = softmax_rows_of(cur);
                break;
            case LayerKind::MaxPoolRows: {
                std::vector<Eigen::Index> arg(cur.cols());
                Mat pooled(1, cur.cols());
                for (Eigen::Index c = 0; c < cur.cols(); ++c) {
                    Eigen::Index best = 0;
                    cur.col(c).maxCoeff(&best);
                    arg[c] = best;
                    pooled(0, c) = cur(best, c);
                }
                if (cache) cache->argmax.push_back(std::move(arg));
                cur = pooled;
                break;
            }
        }
        if (!cur.allFinite()) throw NumericError("forward: non-finite layer output");
    }
    if (cache) cache->output = cur;
    return cur;
}

Mat Net::backward(const ForwardCache& cache, const Mat& output_grad,
                  std::vector<LayerGrad>* grads) const {
    if (cache.inputs.size() != layers_.size()) {
        throw UsageError("backward: cache does not match this net");
    }
    if (grads) grads->assign(layers_.size(), {});
    Mat dy = output_grad;
    std::size_t pool_idx = cache.argmax.size();
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const auto& layer = layers_[li];
        const Mat& x = cache.inputs[li];
        switch (layer.kind) {
            case LayerKind::Dense:
            case LayerKind::PointwiseConv: {
                if (grads) {
                    (*grads)[li].weight = dy.transpose() * x;
                    (*grads)[li].bias = dy.colwise().sum().transpose();
                }
                dy = dy * layer.weight;
                break;
            }
            case LayerKind::Relu:
                dy = (x.array() > 0.0).select(dy, Mat::Zero(dy.rows(), dy.cols()));
                break;
            case LayerKind::SoftmaxRows: {
                const Mat y = softmax_rows_of(x);
                Mat dx(dy.rows(), dy.cols());
                for (Eigen::Index r = 0; r < dy.rows(); ++r) {
                    const double dot = dy.row(r).dot(y.row(r));
                    dx.row(r) = y.row(r).cwiseProduct((dy.row(r).array() - dot).matrix());
                }
                dy = dx;
                break;
            }
            case LayerKind::MaxPoolRows: {
                const auto& arg = cache.argmax[--pool_idx];
                Mat dx = Mat::Zero(x.rows(), x.cols());
                for (Eigen::Index c = 0; c < x.cols(); ++c) dx(arg[c], c) = dy(0, c);
                dy = dx;
                break;
            }
        }
    }
    return dy;
}

void Net::init_params(std::mt19937_64& rng) {
    for (auto& layer : layers_) {
        if (!layer.has_params()) continue;
        const double limit = std::sqrt(6.0 / layer.in);
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
        layer.bias.setZero();
    }
}

std::size_t Net::param_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) {
        if (layer.has_params()) n += layer.weight.size() + layer.bias.size();
    }
    return n;
}

void AdamState::step(Net& net, const std::vector<LayerGrad>& grads) {
    auto& layers = net.layers();
    if (grads.size() != layers.size()) throw DomainError("adam: gradient table shape mismatch");
    if (m_.empty()) {
        m_.resize(layers.size());
        v_.resize(layers.size());
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (!layers[i].has_params()) continue;
            m_[i].weight = Mat::Zero(layers[i].weight.rows(), layers[i].weight.cols());
            m_[i].bias = Vec::Zero(layers[i].bias.size());
            v_[i] = m_[i];
        }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (!layers[i].has_params()) continue;
        if (grads[i].weight.rows() != layers[i].weight.rows() ||
            grads[i].weight.cols() != layers[i].weight.cols()) {
            throw DomainError("adam: gradient shape mismatch at layer " + std::to_string(i));
        }
        auto update = [&](Mat& p, Mat& m, Mat& v, const Mat& g) {
            m = beta1_ * m + (1 - beta1_) * g;
            v = beta2_ * v + (1 - beta2_) * g.cwiseProduct(g);
            p -= lr_ * (m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + eps_).matrix());
        };
        update(layers[i].weight, m_[i].weight, v_[i].weight, grads[i].weight);
        Mat pb = layers[i].bias, mb = m_[i].bias, vb = v_[i].bias;
        update(pb, mb, vb, grads[i].bias);
        layers[i].bias = pb;
        m_[i].bias = mb;
        v_[i].bias = vb;
    }
}

namespace {

constexpr char kMagic[4] = {'T', 'N', 'N', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw DataError("checkpoint: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const auto len = read_u64(in);
    if (len > 1 << 20) throw DataError("checkpoint: implausible string length");
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("checkpoint: truncated string");
    return s;
}

void write_doubles(std::ostream& out, const double* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(8 * n));
}

void read_doubles(std::istream& in, double* p, std::size_t n) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(8 * n));
    if (!in) throw DataError("checkpoint: truncated parameter block");
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot open for write: " + path);
    out.write(kMagic, 4);
    write_u64(out, nets.size());
    for (const auto& [name, net] : nets) {
        write_string(out, name);
        write_u64(out, net.layers().size());
        for (const auto& layer : net.layers()) {
            write_u64(out, static_cast<std::uint64_t>(layer.kind));
            write_u64(out, static_cast<std::uint64_t>(layer.in));
            write_u64(out, static_cast<std::uint64_t>(layer.out));
            if (layer.has_params()) {
                write_doubles(out, layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
                write_doubles(out, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
            }
        }
    }
    write_u64(out, scalars.size());
    for (const auto& [name, value] : scalars) {
        write_string(out, name);
        write_doubles(out, &value, 1);
    }
    write_u64(out, vectors.size());
    for (const auto& [name, value] : vectors) {
        write_string(out, name);
        write_u64(out, value.size());
        write_doubles(out, value.data(), value.size());
    }
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw DataError("checkpoint: bad magic");

    Checkpoint ck;
    const auto n_nets = read_u64(in);
    if (n_nets > 1024) throw DataError("checkpoint: implausible net count");
    for (std::uint64_t i = 0; i < n_nets; ++i) {
        const std::string name = read_string(in);
        const auto n_layers = read_u64(in);
        if (n_layers > 4096) throw DataError("checkpoint: implausible layer count");
        std::vector<Layer> layers;
        layers.reserve(n_layers);
        for (std::uint64_t li = 0; li < n_layers; ++li) {
            const auto kind = read_u64(in);
            if (kind > 4) throw DataError("checkpoint: unknown layer kind");
            const auto in_w = read_u64(in);
            const auto out_w = read_u64(in);
            Layer layer;
            layer.kind = static_cast<LayerKind>(kind);
            layer.in = static_cast<int>(in_w);
            layer.out = static_cast<int>(out_w);
            if (layer.has_params()) {
                if (in_w < 1 || out_w < 1 || in_w > 1 << 20 || out_w > 1 << 20) {
                    throw DataError("checkpoint: implausible layer shape");
                }
                layer.weight.resize(static_cast<Eigen::Index>(out_w), static_cast<Eigen::Index>(in_w));
                layer.bias.resize(static_cast<Eigen::Index>(out_w));
                read_doubles(in, layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
                read_doubles(in, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
            }
            layers.push_back(std::move(layer));
        }
        ck.nets.emplace(name, Net(std::move(layers)));
    }
    const auto n_scalars = read_u64(in);
    if (n_scalars > 1 << 16) throw DataError("checkpoint: implausible scalar count");
    for (std::uint64_t i = 0; i < n_scalars; ++i) {
        const std::string name = read_string(in);
        double v = 0;
        read_doubles(in, &v, 1);
        ck.scalars.emplace(name, v);
    }
    const auto n_vectors = read_u64(in);
    if (n_vectors > 1 << 16) throw DataError("checkpoint: implausible vector count");
    for (std::uint64_t i = 0; i < n_vectors; ++i) {
        const std::string name = read_string(in);
        const auto len = read_u64(in);
        if (len > 1 << 26) throw DataError("checkpoint: implausible vector length");
        std::vector<double> v(len);
        read_doubles(in, v.data(), v.size());
        ck.vectors.emplace(name, std::move(v));
    }
    return ck;
}

}  // namespace gk

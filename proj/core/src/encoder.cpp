#include "graspkit/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace gk {

WorkspaceNormalization workspace_normalization(const WorkspaceMatrix& ws) {
    WorkspaceNormalization norm;
    const std::int64_t l = ws.rows();
    const int n = ws.n_fingers;
    // The centroid is accumulated over sorted per-axis values so the result
    // (and hence the extracted feature) is bit-identical under any row
    // permutation of the workspace.
    Vec3 c = Vec3::Zero();
    std::vector<double> axis(static_cast<std::size_t>(l) * n);
    for (int d = 0; d < 3; ++d) {
        std::size_t k = 0;
        for (std::int64_t r = 0; r < l; ++r) {
            for (int f = 0; f < n; ++f) axis[k++] = ws.fingertip(r, f)(d);
        }
        std::sort(axis.begin(), axis.end());
        double sum = 0;
        for (double v : axis) sum += v;
        c(d) = sum / static_cast<double>(l * n);
    }
    double radius = 0;
    for (std::int64_t r = 0; r < l; ++r) {
        for (int f = 0; f < n; ++f) radius = std::max(radius, (ws.fingertip(r, f) - c).norm());
    }
    norm.centroid = c;
    norm.scale = radius > 1e-12 ? radius : 1.0;
    return norm;
}

Mat normalize_workspace(const WorkspaceMatrix& ws, const WorkspaceNormalization& norm) {
    Mat x = ws.samples;
    for (int f = 0; f < ws.n_fingers; ++f) {
        x.middleCols(3 * f, 3).rowwise() -= norm.centroid.transpose();
    }
    return x / norm.scale;
}

Net make_encoder_net(int n_fingers) {
    const int in = 3 * n_fingers;
    std::vector<Layer> layers;
    const int widths[] = {in, 64, 64, 64, 128, 256, 256};
    for (int i = 0; i < 6; ++i) {
        layers.push_back(Layer::pointwise_conv(widths[i], widths[i + 1]));
        layers.push_back(Layer::relu());
    }
    layers.push_back(Layer::maxpool_rows());
    return Net(std::move(layers));
}

Net make_decoder_net(int n_fingers, std::int64_t rows) {
    std::vector<Layer> layers;
    layers.push_back(Layer::dense(256, 256));
    layers.push_back(Layer::relu());
    layers.push_back(Layer::dense(256, 512));
    layers.push_back(Layer::relu());
    layers.push_back(Layer::dense(512, static_cast<int>(rows * 3 * n_fingers)));
    return Net(std::move(layers));
}

Eigen::RowVectorXd extract_gripper_feature(const Net& encoder, const WorkspaceMatrix& ws) {
    const int in_width = encoder.layers().front().in;
    if (in_width != 3 * ws.n_fingers) {
        throw DomainError("extract_gripper_feature: encoder width does not match finger count");
    }
    const Mat x = normalize_workspace(ws, workspace_normalization(ws));
    return encoder.forward(x).row(0);
}

Mat reconstruct(const Net& decoder, const Eigen::RowVectorXd& feature, int n_fingers) {
    if (feature.size() != decoder.layers().front().in) {
        throw DomainError("reconstruct: feature width mismatch");
    }
    const Mat flat = decoder.forward(feature);
    const std::int64_t total = flat.cols();
    if (total % (3 * n_fingers) != 0) {
        throw DomainError("reconstruct: decoder output not divisible by 3N");
    }
    const std::int64_t rows = total / (3 * n_fingers);
    Mat out(rows, 3 * n_fingers);
    for (std::int64_t r = 0; r < rows; ++r) {
        out.row(r) = flat.block(0, r * 3 * n_fingers, 1, 3 * n_fingers);
    }
    return out;
}

double chamfer_loss_grad(const Mat& input, const Mat& recon, int n_fingers, Mat* grad) {
    if (input.cols() != 3 * n_fingers || recon.cols() != 3 * n_fingers) {
        throw DomainError("chamfer_loss_grad: finger-count mismatch");
    }
    if (grad) *grad = Mat::Zero(recon.rows(), recon.cols());
    double loss = 0;
    for (int f = 0; f < n_fingers; ++f) {
        const auto a = input.middleCols(3 * f, 3);
        const auto b = recon.middleCols(3 * f, 3);
        // recon -> input term: each reconstruction point pulls toward its
        // nearest input point.
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            double best = std::numeric_limits<double>::infinity();
            Eigen::Index arg = 0;
            for (Eigen::Index k = 0; k < a.rows(); ++k) {
                const double d2 = (b.row(j) - a.row(k)).squaredNorm();
                if (d2 < best) {
                    best = d2;
                    arg = k;
                }
            }
            loss += best;
            if (grad) grad->block<1, 3>(j, 3 * f) += 2.0 * (b.row(j) - a.row(arg));
        }
        // input -> recon term: the matched reconstruction point receives the
        // gradient.
        for (Eigen::Index j = 0; j < a.rows(); ++j) {
            double best = std::numeric_limits<double>::infinity();
            Eigen::Index arg = 0;
            for (Eigen::Index k = 0; k < b.rows(); ++k) {
                const double d2 = (a.row(j) - b.row(k)).squaredNorm();
                if (d2 < best) {
                    best = d2;
                    arg = k;
                }
            }
            loss += best;
            if (grad) grad->block<1, 3>(arg, 3 * f) += 2.0 * (b.row(arg) - a.row(j));
        }
    }
    return loss;
}

AutoencoderResult train_autoencoder(const std::vector<GripperModel>& grippers,
                                    const AutoencoderOptions& options) {
    if (grippers.empty()) throw UsageError("train_autoencoder: need at least one gripper");
    const int n = grippers.front().n_fingers;
    for (const auto& g : grippers) {
        if (g.n_fingers != n) {
            throw DomainError("train_autoencoder: grippers must share a finger count");
        }
    }

    std::mt19937_64 rng(options.seed);
    AutoencoderResult result;
    result.encoder = make_encoder_net(n);
    result.decoder = make_decoder_net(n, options.workspace_rows);
    result.encoder.init_params(rng);
    result.decoder.init_params(rng);

    std::vector<Mat> inputs;
    inputs.reserve(grippers.size());
    for (std::size_t g = 0; g < grippers.size(); ++g) {
        const WorkspaceMatrix ws =
            sample_workspace(grippers[g], options.workspace_rows, options.seed + 17 * g + 1);
        inputs.push_back(normalize_workspace(ws, workspace_normalization(ws)));
    }

    AdamState opt_enc(options.lr), opt_dec(options.lr);
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        double epoch_loss = 0;
        for (int step = 0; step < options.steps_per_epoch; ++step) {
            double loss = 0;
            for (const Mat& x : inputs) {
                ForwardCache enc_cache, dec_cache;
                const Mat feature = result.encoder.forward(x, &enc_cache);
                const Mat flat = result.decoder.forward(feature, &dec_cache);
                Mat recon(x.rows(), x.cols());
                for (Eigen::Index r = 0; r < x.rows(); ++r) {
                    recon.row(r) = flat.block(0, r * x.cols(), 1, x.cols());
                }
                Mat d_recon;
                loss += chamfer_loss_grad(x, recon, n, &d_recon);
                Mat d_flat(1, flat.cols());
                for (Eigen::Index r = 0; r < x.rows(); ++r) {
                    d_flat.block(0, r * x.cols(), 1, x.cols()) = d_recon.row(r);
                }
                std::vector<LayerGrad> dec_grads, enc_grads;
                const Mat d_feature = result.decoder.backward(dec_cache, d_flat, &dec_grads);
                result.encoder.backward(enc_cache, d_feature, &enc_grads);
                opt_dec.step(result.decoder, dec_grads);
                opt_enc.step(result.encoder, enc_grads);
            }
            if (!std::isfinite(loss)) {
                throw NumericError("train_autoencoder: loss diverged at epoch " +
                                   std::to_string(epoch));
            }
            epoch_loss = loss;  // record the last step of the epoch
        }
        result.loss_curve.push_back(epoch_loss);
    }
    return result;
}

}  // namespace gk

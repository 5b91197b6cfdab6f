#pragma once

#include "graspkit/nn.hpp"
#include "graspkit/workspace.hpp"

namespace gk {

// Centering / isotropic scaling applied to a workspace before encoding.
// Computed from the workspace itself, so feature extraction stays a pure
// function of the input matrix.
struct WorkspaceNormalization {
    Vec3 centroid = Vec3::Zero();
    double scale = 1.0;
};
WorkspaceNormalization workspace_normalization(const WorkspaceMatrix& ws);
Mat normalize_workspace(const WorkspaceMatrix& ws, const WorkspaceNormalization& norm);

// Encoder: 6 pointwise convolutions (3N -> 64 -> 64 -> 64 -> 128 -> 256 ->
// 256), each ReLU-activated, then a row max-pool to a 1 x 256 feature.
Net make_encoder_net(int n_fingers);
// Decoder: 256 -> 256 -> 512 -> L*3N dense stack, last layer linear.
Net make_decoder_net(int n_fingers, std::int64_t rows);

// 1 x 256 gripper feature; bit-identical under row permutation of the input.
Eigen::RowVectorXd extract_gripper_feature(const Net& encoder, const WorkspaceMatrix& ws);

// Decoder output reshaped to L x 3N (not FK-validated).
Mat reconstruct(const Net& decoder, const Eigen::RowVectorXd& feature, int n_fingers);

struct AutoencoderOptions {
    std::int64_t workspace_rows = 512;
    int epochs = 200;
    int steps_per_epoch = 5;
    double lr = 2e-3;
    std::uint64_t seed = 0;
};

struct AutoencoderResult {
    Net encoder;
    Net decoder;
    std::vector<double> loss_curve;  // coupled Chamfer per epoch, summed over grippers
};

// Joint autoencoder training over one or more grippers with a common finger
// count; loss is the coupled Chamfer distance between the normalized
// workspace and its reconstruction.
AutoencoderResult train_autoencoder(const std::vector<GripperModel>& grippers,
                                    const AutoencoderOptions& options);

// Chamfer loss plus its gradient with respect to the reconstruction; used by
// the trainer and exercised directly in tests.
double chamfer_loss_grad(const Mat& input, const Mat& reconstruction, int n_fingers,
                         Mat* grad_reconstruction);

}  // namespace gk

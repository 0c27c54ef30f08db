#pragma once

// Desk-scale siamese pretraining: a two-layer MLP encoder stands in for the
// convolutional backbone, followed by the projector head
// [linear -> batch-norm -> ReLU] x 2 -> linear. Forward and backward passes
// are written out by hand over Eigen matrices, one sample per row.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "agrissl/image.hpp"
#include "agrissl/netpbm.hpp"
#include "agrissl/policy.hpp"
#include "agrissl/twins.hpp"

namespace agrissl::tiny {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kRunningMomentum = 0.1;

struct Architecture {
  int input_width = 16;
  int input_height = 16;
  int hidden = 64;     // encoder hidden width
  int feature = 32;    // encoder output / projector input
  int projector = 32;  // projector hidden width
  int embedding = 8;   // D

  int input_size() const noexcept { return input_width * input_height * 3; }
  bool operator==(const Architecture&) const = default;
};

struct LinearSlot {
  Eigen::Index weight = 0;  // out x in, row-major
  Eigen::Index bias = 0;
  int in = 0;
  int out = 0;
};

struct NormSlot {
  Eigen::Index gamma = 0;
  Eigen::Index beta = 0;
  int width = 0;
};

/// Flat parameter layout, in storage order:
/// enc1 (W, b), enc2 (W, b), proj1 (W, b), bn1 (gamma, beta),
/// proj2 (W, b), bn2 (gamma, beta), proj3 (W, b).
struct ParameterLayout {
  LinearSlot enc1, enc2, proj1, proj2, proj3;
  NormSlot bn1, bn2;
  Eigen::Index total = 0;
};

ParameterLayout parameter_layout(const Architecture& arch);

/// Running statistics of both batch-norm layers:
/// [bn1 mean | bn1 var | bn2 mean | bn2 var], each `projector` long.
Eigen::Index running_stat_count(const Architecture& arch);

struct TinyModel {
  Architecture arch;
  Vector params;
  Vector running;
};

/// Weights and biases uniform in +-1/sqrt(fan_in), gamma = 1, beta = 0,
/// running mean 0 and variance 1.
TinyModel make_model(const Architecture& arch, std::uint64_t seed);

/// Every parameter zero (gamma included); running statistics as in make_model.
TinyModel zero_model(const Architecture& arch);

enum class Mode { kTrain, kEval };

/// Resize each image to the input size and stack as rows of byte/127.5 - 1
/// values in interleaved R,G,B order.
Matrix images_to_batch(const std::vector<ImageU8>& images, const Architecture& arch);

struct ForwardCache {
  Matrix input, pre1, hidden1, features;
  Matrix proj_pre1, xhat1, post_bn1, act1;
  Matrix proj_pre2, xhat2, post_bn2, act2;
  Eigen::RowVectorXd inv_std1, inv_std2;
  Eigen::RowVectorXd batch_mean1, batch_var1, batch_mean2, batch_var2;
};

/// n x D embeddings. Train mode normalizes with batch statistics (population
/// variance); eval mode with the stored running statistics.
Matrix forward(const TinyModel& model, const Matrix& batch, Mode mode = Mode::kTrain,
               ForwardCache* cache = nullptr);

struct BackwardResult {
  double loss = 0.0;
  Vector grad;  // same layout as TinyModel::params, no weight decay
  twins::CrossCorr<double> c;
  ForwardCache view1, view2;
};

/// Loss of the two views and its exact gradient with respect to every
/// parameter. Both views pass through the same parameter vector.
BackwardResult backward(const TinyModel& model, const Matrix& view1, const Matrix& view2,
                        const twins::BTLossConfig& cfg);

double composite_loss(const TinyModel& model, const Matrix& view1, const Matrix& view2,
                      const twins::BTLossConfig& cfg);

inline constexpr double kModelGradFloor = 1e-6;

struct GradCheckReport {
  // ||analytic - numeric|| / max(||analytic||, ||numeric||) over the checked
  // coordinates (Euclidean norms).
  double relative_error = 0.0;
  // Worst single coordinate, floor kModelGradFloor. Diagnostic only: at h=1e-4
  // it is dominated by O(h^2) truncation on coordinates far below the
  // gradient's scale when a batch-norm column has small spread.
  double max_coord_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;  // perturbation flipped a ReLU; not differentiable there
};

/// Central differences against backward() over `coords` (all parameters when
/// empty). Coordinates whose +-h perturbation changes any ReLU activation
/// pattern are counted in skipped_kinks instead of compared.
GradCheckReport model_finite_diff_check(const TinyModel& model, const Matrix& view1,
                                        const Matrix& view2, const twins::BTLossConfig& cfg,
                                        double h, std::span<const Eigen::Index> coords = {});

struct TrainConfig {
  int batch_size = 128;
  double learning_rate = 0.02;
  double weight_decay = 1e-6;
  int epochs = 50;
  double lambda = twins::kDefaultLambda;
  std::uint64_t seed = 7;
  int max_steps = 0;  // 0: run all epochs
  int workers = 1;    // view generation threads

  bool operator==(const TrainConfig&) const = default;
};

void validate_config(const TrainConfig& cfg);

struct SgdState {
  std::uint64_t step = 0;
};

struct CorrelationStats {
  double diag_mean = 0.0;
  double offdiag_mean = 0.0;  // mean |C_ij| over i != j
};

CorrelationStats correlation_stats(const twins::CrossCorr<double>& c);

struct StepResult {
  double loss = 0.0;
  CorrelationStats stats;
};

/// theta <- theta - lr * (g + wd * theta), then running statistics are
/// blended with momentum 0.1 using the first view's batch statistics.
/// Throws std::runtime_error when the loss is not finite.
StepResult train_step(TinyModel& model, SgdState& state, const Matrix& view1, const Matrix& view2,
                      const TrainConfig& cfg);

/// C of a probe batch using batch statistics, without touching the model.
CorrelationStats probe_correlation(const TinyModel& model, const Matrix& view1,
                                   const Matrix& view2);

struct Checkpoint {
  Architecture arch;
  Vector params;
  Vector running;
  std::uint64_t step = 0;
  TrainConfig config;

  TinyModel model() const { return {arch, params, running}; }
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "BTCK", u32 version, six u32 architecture dims, u64 step, config snapshot
/// (u32 batch_size, u32 epochs, u32 max_steps, f64 lr, f64 weight decay,
/// f64 lambda, u64 seed), u64 parameter count + f64 parameters, u64 running
/// count + f64 running statistics. All little-endian.
Bytes save_checkpoint(const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes);

struct TraceRow {
  std::uint64_t step = 0;
  double loss = 0.0;
  double diag_mean = 0.0;
  double offdiag_mean = 0.0;
};

std::string trace_csv(const std::vector<TraceRow>& trace);

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<TraceRow> trace;
};

/// Seeded shuffle per epoch, views from make_views with image index
/// epoch * N + i so every epoch sees fresh augmentations, one SGD step per
/// full batch (the remainder of an epoch is dropped).
PretrainResult pretrain(const std::vector<ImageU8>& dataset, const Policy& policy,
                        const SoilBank* soil, const TrainConfig& cfg,
                        const Architecture& arch = {},
                        const std::function<void(const TraceRow&)>& on_step = {});

/// Views of `images` under `policy` stacked into model batches.
std::pair<Matrix, Matrix> view_batches(const std::vector<ImageU8>& images, const Policy& policy,
                                       const SoilBank* soil, const Architecture& arch,
                                       std::uint64_t index_offset = 0, int workers = 1);

}  // namespace agrissl::tiny

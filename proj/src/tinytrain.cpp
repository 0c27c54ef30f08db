#include "agrissl/tinytrain.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "agrissl/parallel.hpp"

namespace agrissl::tiny {

namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

RowMajorMap weight(const Vector& p, const LinearSlot& s) {
  return RowMajorMap(p.data() + s.weight, s.out, s.in);
}
RowMajorMutMap weight(Vector& p, const LinearSlot& s) {
  return RowMajorMutMap(p.data() + s.weight, s.out, s.in);
}
Eigen::Map<const Eigen::RowVectorXd> slice(const Vector& p, Eigen::Index offset, int n) {
  return Eigen::Map<const Eigen::RowVectorXd>(p.data() + offset, n);
}
Eigen::Map<Eigen::RowVectorXd> slice(Vector& p, Eigen::Index offset, int n) {
  return Eigen::Map<Eigen::RowVectorXd>(p.data() + offset, n);
}

Matrix linear(const Vector& p, const LinearSlot& s, const Matrix& x) {
  Matrix y = x * weight(p, s).transpose();
  y.rowwise() += slice(p, s.bias, s.out);
  return y;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

// Batch-norm forward. In train mode mean/var come from the batch, otherwise
// from `running` at the given offsets.
void batch_norm(const Vector& p, const NormSlot& s, const Matrix& x, Mode mode,
                const Vector& running, Eigen::Index mean_at, Eigen::Index var_at, Matrix& xhat,
                Eigen::RowVectorXd& inv_std, Eigen::RowVectorXd& batch_mean,
                Eigen::RowVectorXd& batch_var, Matrix& out) {
  batch_mean = x.colwise().mean();
  const Matrix centered_batch = x.rowwise() - batch_mean;
  batch_var = centered_batch.array().square().colwise().mean().matrix();
  if (mode == Mode::kTrain) {
    inv_std = (batch_var.array() + kBatchNormEps).rsqrt().matrix();
    xhat = centered_batch.array().rowwise() * inv_std.array();
  } else {
    const auto mean = slice(running, mean_at, s.width);
    const auto var = slice(running, var_at, s.width);
    inv_std = (var.array() + kBatchNormEps).rsqrt().matrix();
    xhat = (x.rowwise() - mean).array().rowwise() * inv_std.array();
  }
  out = xhat.array().rowwise() * slice(p, s.gamma, s.width).array();
  out.rowwise() += slice(p, s.beta, s.width);
}

// Batch-norm backward for train-mode statistics. Accumulates dgamma/dbeta
// into `grad` and returns dL/dx.
Matrix batch_norm_backward(const Vector& p, const NormSlot& s, const Matrix& xhat,
                           const Eigen::RowVectorXd& inv_std, const Matrix& grad_out, Vector& grad) {
  const double n = static_cast<double>(xhat.rows());
  slice(grad, s.gamma, s.width) += (grad_out.array() * xhat.array()).colwise().sum().matrix();
  slice(grad, s.beta, s.width) += grad_out.colwise().sum();
  const Matrix gxhat = grad_out.array().rowwise() * slice(p, s.gamma, s.width).array();
  const Eigen::RowVectorXd sum_g = gxhat.colwise().sum();
  const Eigen::RowVectorXd sum_gx = (gxhat.array() * xhat.array()).colwise().sum().matrix();
  Matrix gx = (n * gxhat).rowwise() - sum_g;
  gx -= (xhat.array().rowwise() * sum_gx.array()).matrix();
  return (gx.array().rowwise() * (inv_std.array() / n)).matrix();
}

void linear_backward(const Vector& p, const LinearSlot& s, const Matrix& input,
                     const Matrix& grad_out, Vector& grad, Matrix* grad_input) {
  weight(grad, s) += grad_out.transpose() * input;
  slice(grad, s.bias, s.out) += grad_out.colwise().sum();
  if (grad_input != nullptr) *grad_input = grad_out * weight(p, s);
}

void backprop_view(const TinyModel& model, const ParameterLayout& L, const ForwardCache& c,
                   const Matrix& grad_z, Vector& grad) {
  const Vector& p = model.params;
  Matrix g;
  linear_backward(p, L.proj3, c.act2, grad_z, grad, &g);
  g = g.cwiseProduct((c.post_bn2.array() > 0.0).cast<double>().matrix());
  g = batch_norm_backward(p, L.bn2, c.xhat2, c.inv_std2, g, grad);
  linear_backward(p, L.proj2, c.act1, g, grad, &g);
  g = g.cwiseProduct((c.post_bn1.array() > 0.0).cast<double>().matrix());
  g = batch_norm_backward(p, L.bn1, c.xhat1, c.inv_std1, g, grad);
  linear_backward(p, L.proj1, c.features, g, grad, &g);
  linear_backward(p, L.enc2, c.hidden1, g, grad, &g);
  g = g.cwiseProduct((c.pre1.array() > 0.0).cast<double>().matrix());
  linear_backward(p, L.enc1, c.input, g, grad, nullptr);
}

// ReLU on/off pattern of one forward pass, for kink detection.
std::vector<bool> relu_pattern(const ForwardCache& c) {
  std::vector<bool> out;
  out.reserve(c.pre1.size() + c.post_bn1.size() + c.post_bn2.size());
  for (const Matrix* m : {&c.pre1, &c.post_bn1, &c.post_bn2}) {
    for (Eigen::Index i = 0; i < m->size(); ++i) out.push_back(m->data()[i] > 0.0);
  }
  return out;
}

// Little-endian byte helpers for the checkpoint format.
class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const char* s, std::size_t n) { bytes.insert(bytes.end(), s, s + n); }
  Bytes bytes;

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  void need(std::uint64_t n, const char* what) {
    if (n > bytes_.size() - pos_) {
      throw DecodeError(std::string("checkpoint length error: truncated ") + what);
    }
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::uint64_t get(int n) {
    need(static_cast<std::uint64_t>(n), "header");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

ParameterLayout parameter_layout(const Architecture& a) {
  ParameterLayout L;
  Eigen::Index at = 0;
  auto lin = [&at](int in, int out) {
    LinearSlot s{at, at + static_cast<Eigen::Index>(in) * out, in, out};
    at = s.bias + out;
    return s;
  };
  auto norm = [&at](int width) {
    NormSlot s{at, at + width, width};
    at += 2 * width;
    return s;
  };
  L.enc1 = lin(a.input_size(), a.hidden);
  L.enc2 = lin(a.hidden, a.feature);
  L.proj1 = lin(a.feature, a.projector);
  L.bn1 = norm(a.projector);
  L.proj2 = lin(a.projector, a.projector);
  L.bn2 = norm(a.projector);
  L.proj3 = lin(a.projector, a.embedding);
  L.total = at;
  return L;
}

Eigen::Index running_stat_count(const Architecture& arch) { return 4 * arch.projector; }

namespace {

Vector initial_running(const Architecture& arch) {
  Vector r = Vector::Zero(running_stat_count(arch));
  r.segment(arch.projector, arch.projector).setOnes();
  r.segment(3 * arch.projector, arch.projector).setOnes();
  return r;
}

void check_arch(const Architecture& a) {
  if (a.input_width < 1 || a.input_height < 1 || a.hidden < 1 || a.feature < 1 ||
      a.projector < 1 || a.embedding < 1) {
    throw ConfigError("architecture dimensions must all be >= 1");
  }
}

}  // namespace

TinyModel make_model(const Architecture& arch, std::uint64_t seed) {
  check_arch(arch);
  const ParameterLayout L = parameter_layout(arch);
  TinyModel m{arch, Vector::Zero(L.total), initial_running(arch)};
  RandomStream rng(seed);
  for (const LinearSlot* s : {&L.enc1, &L.enc2, &L.proj1, &L.proj2, &L.proj3}) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s->in));
    for (Eigen::Index i = s->weight; i < s->bias + s->out; ++i) {
      m.params[i] = rng.uniform(-bound, bound);
    }
  }
  for (const NormSlot* s : {&L.bn1, &L.bn2}) m.params.segment(s->gamma, s->width).setOnes();
  return m;
}

TinyModel zero_model(const Architecture& arch) {
  check_arch(arch);
  return {arch, Vector::Zero(parameter_layout(arch).total), initial_running(arch)};
}

Matrix images_to_batch(const std::vector<ImageU8>& images, const Architecture& arch) {
  Matrix x(static_cast<Eigen::Index>(images.size()), arch.input_size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const ImageU8 img = resize_bilinear(images[i], arch.input_width, arch.input_height);
    const auto data = img.data();
    for (std::size_t k = 0; k < data.size(); ++k) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = data[k] / 127.5 - 1.0;
    }
  }
  return x;
}

Matrix forward(const TinyModel& model, const Matrix& batch, Mode mode, ForwardCache* cache) {
  const Architecture& a = model.arch;
  if (batch.cols() != a.input_size()) {
    throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                     " columns, model expects " + std::to_string(a.input_size()));
  }
  if (mode == Mode::kTrain && batch.rows() < 2) {
    throw ShapeError("forward: train-mode batch norm needs at least 2 samples");
  }
  const ParameterLayout L = parameter_layout(a);
  const Vector& p = model.params;
  ForwardCache local;
  ForwardCache& c = cache != nullptr ? *cache : local;

  c.input = batch;
  c.pre1 = linear(p, L.enc1, batch);
  c.hidden1 = relu(c.pre1);
  c.features = linear(p, L.enc2, c.hidden1);
  c.proj_pre1 = linear(p, L.proj1, c.features);
  batch_norm(p, L.bn1, c.proj_pre1, mode, model.running, 0, a.projector, c.xhat1, c.inv_std1,
             c.batch_mean1, c.batch_var1, c.post_bn1);
  c.act1 = relu(c.post_bn1);
  c.proj_pre2 = linear(p, L.proj2, c.act1);
  batch_norm(p, L.bn2, c.proj_pre2, mode, model.running, 2 * a.projector, 3 * a.projector,
             c.xhat2, c.inv_std2, c.batch_mean2, c.batch_var2, c.post_bn2);
  c.act2 = relu(c.post_bn2);
  return linear(p, L.proj3, c.act2);
}

BackwardResult backward(const TinyModel& model, const Matrix& view1, const Matrix& view2,
                        const twins::BTLossConfig& cfg) {
  if (view1.rows() != view2.rows() || view1.rows() < 2) {
    throw ShapeError("backward: both views need the same batch size n >= 2");
  }
  const ParameterLayout L = parameter_layout(model.arch);
  BackwardResult r;
  const Matrix z1 = forward(model, view1, Mode::kTrain, &r.view1);
  const Matrix z2 = forward(model, view2, Mode::kTrain, &r.view2);
  const auto g = twins::bt_loss_grad(z1, z2, cfg);
  r.loss = g.loss;
  r.c = g.c;
  r.grad = Vector::Zero(L.total);
  backprop_view(model, L, r.view1, g.grad_z1, r.grad);
  backprop_view(model, L, r.view2, g.grad_z2, r.grad);
  return r;
}

double composite_loss(const TinyModel& model, const Matrix& view1, const Matrix& view2,
                      const twins::BTLossConfig& cfg) {
  return twins::bt_loss_from_embeddings(forward(model, view1), forward(model, view2), cfg);
}

GradCheckReport model_finite_diff_check(const TinyModel& model, const Matrix& view1,
                                        const Matrix& view2, const twins::BTLossConfig& cfg,
                                        double h, std::span<const Eigen::Index> coords) {
  if (!(h > 0.0)) throw ParameterError("model_finite_diff_check: h must be > 0");
  const BackwardResult analytic = backward(model, view1, view2, cfg);
  const auto base1 = relu_pattern(analytic.view1);
  const auto base2 = relu_pattern(analytic.view2);

  std::vector<Eigen::Index> all;
  if (coords.empty()) {
    all.resize(static_cast<std::size_t>(model.params.size()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    coords = all;
  }

  GradCheckReport report;
  double diff_sq = 0.0, analytic_sq = 0.0, numeric_sq = 0.0;
  TinyModel probe = model;
  for (const Eigen::Index k : coords) {
    const double saved = probe.params[k];
    bool kink = false;
    double values[2];
    for (int side = 0; side < 2; ++side) {
      probe.params[k] = saved + (side == 0 ? h : -h);
      ForwardCache c1, c2;
      const Matrix z1 = forward(probe, view1, Mode::kTrain, &c1);
      const Matrix z2 = forward(probe, view2, Mode::kTrain, &c2);
      kink = kink || relu_pattern(c1) != base1 || relu_pattern(c2) != base2;
      values[side] = twins::bt_loss_from_embeddings(z1, z2, cfg);
    }
    probe.params[k] = saved;
    if (kink) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = (values[0] - values[1]) / (2.0 * h);
    report.max_coord_relative_error =
        std::max(report.max_coord_relative_error,
                 twins::relative_error(analytic.grad[k], numeric, kModelGradFloor));
    diff_sq += (analytic.grad[k] - numeric) * (analytic.grad[k] - numeric);
    analytic_sq += analytic.grad[k] * analytic.grad[k];
    numeric_sq += numeric * numeric;
    ++report.checked;
  }
  const double denom = std::sqrt(std::max({analytic_sq, numeric_sq, 1e-16}));
  report.relative_error = std::sqrt(diff_sq) / denom;
  return report;
}

void validate_config(const TrainConfig& cfg) {
  if (cfg.batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ConfigError("learning_rate must be a finite non-negative real");
  }
  if (!(cfg.weight_decay >= 0.0) || !std::isfinite(cfg.weight_decay)) {
    throw ConfigError("weight_decay must be a finite non-negative real");
  }
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(cfg.lambda > 0.0) || !std::isfinite(cfg.lambda)) throw ConfigError("lambda must be > 0");
  if (cfg.max_steps < 0) throw ConfigError("max_steps must be >= 0");
}

CorrelationStats correlation_stats(const twins::CrossCorr<double>& c) {
  CorrelationStats s;
  const Eigen::Index d = c.rows();
  s.diag_mean = c.diagonal().mean();
  if (d > 1) {
    s.offdiag_mean = (c.array().abs().sum() - c.diagonal().array().abs().sum()) /
                     static_cast<double>(d * (d - 1));
  }
  return s;
}

StepResult train_step(TinyModel& model, SgdState& state, const Matrix& view1, const Matrix& view2,
                      const TrainConfig& cfg) {
  const BackwardResult r = backward(model, view1, view2, twins::BTLossConfig{cfg.lambda});
  if (!std::isfinite(r.loss) || !r.grad.allFinite()) {
    throw std::runtime_error("train_step: non-finite loss or gradient at step " +
                             std::to_string(state.step) + " (loss " + std::to_string(r.loss) + ")");
  }
  model.params -= cfg.learning_rate * (r.grad + cfg.weight_decay * model.params);

  const int w = model.arch.projector;
  auto blend = [&](Eigen::Index at, const Eigen::RowVectorXd& batch_stat) {
    model.running.segment(at, w) =
        (1.0 - kRunningMomentum) * model.running.segment(at, w) + kRunningMomentum * batch_stat.transpose();
  };
  blend(0, r.view1.batch_mean1);
  blend(w, r.view1.batch_var1);
  blend(2 * w, r.view1.batch_mean2);
  blend(3 * w, r.view1.batch_var2);

  ++state.step;
  return {r.loss, correlation_stats(r.c)};
}

CorrelationStats probe_correlation(const TinyModel& model, const Matrix& view1,
                                   const Matrix& view2) {
  const Matrix z1 = twins::batch_normalize(forward(model, view1));
  const Matrix z2 = twins::batch_normalize(forward(model, view2));
  return correlation_stats(twins::cross_correlation(z1, z2));
}

Bytes save_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.raw("BTCK", 4);
  w.u32(kCheckpointVersion);
  for (int d : {ckpt.arch.input_width, ckpt.arch.input_height, ckpt.arch.hidden, ckpt.arch.feature,
                ckpt.arch.projector, ckpt.arch.embedding}) {
    w.u32(static_cast<std::uint32_t>(d));
  }
  w.u64(ckpt.step);
  w.u32(static_cast<std::uint32_t>(ckpt.config.batch_size));
  w.u32(static_cast<std::uint32_t>(ckpt.config.epochs));
  w.u32(static_cast<std::uint32_t>(ckpt.config.max_steps));
  w.f64(ckpt.config.learning_rate);
  w.f64(ckpt.config.weight_decay);
  w.f64(ckpt.config.lambda);
  w.u64(ckpt.config.seed);
  w.u64(static_cast<std::uint64_t>(ckpt.params.size()));
  for (Eigen::Index i = 0; i < ckpt.params.size(); ++i) w.f64(ckpt.params[i]);
  w.u64(static_cast<std::uint64_t>(ckpt.running.size()));
  for (Eigen::Index i = 0; i < ckpt.running.size(); ++i) w.f64(ckpt.running[i]);
  return std::move(w.bytes);
}

Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), "BTCK", 4) != 0) throw DecodeError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DecodeError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  c.arch.input_width = static_cast<int>(r.u32());
  c.arch.input_height = static_cast<int>(r.u32());
  c.arch.hidden = static_cast<int>(r.u32());
  c.arch.feature = static_cast<int>(r.u32());
  c.arch.projector = static_cast<int>(r.u32());
  c.arch.embedding = static_cast<int>(r.u32());
  check_arch(c.arch);
  c.step = r.u64();
  c.config.batch_size = static_cast<int>(r.u32());
  c.config.epochs = static_cast<int>(r.u32());
  c.config.max_steps = static_cast<int>(r.u32());
  c.config.learning_rate = r.f64();
  c.config.weight_decay = r.f64();
  c.config.lambda = r.f64();
  c.config.seed = r.u64();

  const std::uint64_t count = r.u64();
  const auto expected = static_cast<std::uint64_t>(parameter_layout(c.arch).total);
  if (count != expected) {
    throw DecodeError("checkpoint length error: " + std::to_string(count) +
                      " parameters, architecture needs " + std::to_string(expected));
  }
  r.need(count * 8, "parameters");
  c.params.resize(static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i) c.params[static_cast<Eigen::Index>(i)] = r.f64();

  const std::uint64_t running = r.u64();
  if (running != static_cast<std::uint64_t>(running_stat_count(c.arch))) {
    throw DecodeError("checkpoint length error: running statistics count mismatch");
  }
  r.need(running * 8, "running statistics");
  c.running.resize(static_cast<Eigen::Index>(running));
  for (std::uint64_t i = 0; i < running; ++i) c.running[static_cast<Eigen::Index>(i)] = r.f64();
  return c;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "step,loss,diag_mean,offdiag_mean\n";
  for (const auto& row : trace) {
    out << row.step << "," << row.loss << "," << row.diag_mean << "," << row.offdiag_mean << "\n";
  }
  return out.str();
}

std::pair<Matrix, Matrix> view_batches(const std::vector<ImageU8>& images, const Policy& policy,
                                       const SoilBank* soil, const Architecture& arch,
                                       std::uint64_t index_offset, int workers) {
  check_policy_ready(policy, soil);
  std::vector<ImageU8> first(images.size());
  std::vector<ImageU8> second(images.size());
  parallel_for(images.size(), workers, [&](std::size_t i) {
    auto views = make_views(images[i], policy, index_offset + i, soil);
    first[i] = std::move(views.first);
    second[i] = std::move(views.second);
  });
  return {images_to_batch(first, arch), images_to_batch(second, arch)};
}

PretrainResult pretrain(const std::vector<ImageU8>& dataset, const Policy& policy,
                        const SoilBank* soil, const TrainConfig& cfg, const Architecture& arch,
                        const std::function<void(const TraceRow&)>& on_step) {
  validate_config(cfg);
  validate_policy(policy);
  check_policy_ready(policy, soil);
  if (dataset.size() < static_cast<std::size_t>(cfg.batch_size)) {
    throw ConfigError("dataset has " + std::to_string(dataset.size()) +
                      " images, fewer than batch_size " + std::to_string(cfg.batch_size));
  }
  TinyModel model = make_model(arch, cfg.seed);
  SgdState state;
  PretrainResult result;
  const std::size_t n = dataset.size();
  const std::size_t batches = n / static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::size_t> order(n);

  auto done = [&] { return cfg.max_steps > 0 && state.step >= static_cast<std::uint64_t>(cfg.max_steps); };
  for (int epoch = 0; epoch < cfg.epochs && !done(); ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    RandomStream shuffle(derive_seed(cfg.seed, 0x5348554646ULL + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle.uniform_index(i + 1)]);
    }
    for (std::size_t b = 0; b < batches; ++b) {
      if (done()) break;
      std::vector<ImageU8> v1(cfg.batch_size);
      std::vector<ImageU8> v2(cfg.batch_size);
      parallel_for(static_cast<std::size_t>(cfg.batch_size), cfg.workers, [&](std::size_t k) {
        const std::size_t idx = order[b * cfg.batch_size + k];
        auto views = make_views(dataset[idx], policy, static_cast<std::uint64_t>(epoch) * n + idx, soil);
        v1[k] = std::move(views.first);
        v2[k] = std::move(views.second);
      });
      const StepResult step =
          train_step(model, state, images_to_batch(v1, arch), images_to_batch(v2, arch), cfg);
      TraceRow row{state.step, step.loss, step.stats.diag_mean, step.stats.offdiag_mean};
      result.trace.push_back(row);
      if (on_step) on_step(row);
    }
  }
  result.checkpoint = {arch, model.params, model.running, state.step, cfg};
  return result;
}

}  // namespace agrissl::tiny

#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "agrissl/gradcheck.hpp"
#include "agrissl/metrics.hpp"
#include "agrissl/netpbm.hpp"
#include "agrissl/parallel.hpp"
#include "agrissl/policy.hpp"
#include "agrissl/synthetic.hpp"
#include "agrissl/tinytrain.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;

namespace agrissl::cli {

namespace {

using Clock = std::chrono::steady_clock;

// With D = 8 the library default lambda leaves the redundancy term too weak to
// prevent a collapsed, fully correlated embedding; 1/D balances the terms.
constexpr double kDeskLambda = 0.125;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Usage-level failure: bad flags, unreadable config, missing soil bank.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) out.push_back(entry.path());
  }
  // Lexicographic filename order defines image_index.
  std::sort(out.begin(), out.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

Policy read_policy(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("policy file not found: " + path.string());
  Policy p = load_policy(read_text(path));
  validate_policy(p);
  return p;
}

std::string policy_summary(const Policy& p) {
  std::string out;
  for (const auto& e : p.entries) {
    if (!out.empty()) out += ",";
    char prob[32];
    std::snprintf(prob, sizeof(prob), "%.3f", e.probability);
    out += std::string(augmentation_name(e.name)) + ":" + prob;
  }
  return out;
}

SoilBank load_soil_dir(const fs::path& dir) {
  SoilBank bank;
  for (const auto& f : list_files(dir, ".ppm")) bank.images.push_back(read_ppm(f));
  return bank;
}

bool needs_soil(const Policy& p) {
  const auto* e = p.find(Augmentation::kBackgroundInvariance);
  return e != nullptr && e->probability > 0.0;
}

// Soil bank named by the policy; relative paths resolve against the policy
// file's directory.
std::optional<SoilBank> policy_soil(const Policy& p, const fs::path& policy_path) {
  if (p.soil_bank_path.empty()) return std::nullopt;
  fs::path dir = p.soil_bank_path;
  if (dir.is_relative()) dir = policy_path.parent_path() / dir;
  if (!fs::is_directory(dir)) throw UsageError("soil bank directory not found: " + dir.string());
  return load_soil_dir(dir);
}

std::map<std::string, std::string> read_key_values(const std::string& text, const fs::path& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

struct TrainSetup {
  tiny::TrainConfig cfg;
  tiny::Architecture arch;
};

TrainSetup read_train_config(const fs::path& path) {
  TrainSetup s;
  if (path.empty()) return s;
  if (!fs::exists(path)) throw UsageError("config file not found: " + path.string());
  for (const auto& [key, value] : read_key_values(read_text(path), path)) {
    try {
      if (key == "batch_size") s.cfg.batch_size = std::stoi(value);
      else if (key == "learning_rate") s.cfg.learning_rate = std::stod(value);
      else if (key == "weight_decay") s.cfg.weight_decay = std::stod(value);
      else if (key == "epochs") s.cfg.epochs = std::stoi(value);
      else if (key == "lambda") s.cfg.lambda = std::stod(value);
      else if (key == "seed") s.cfg.seed = std::stoull(value);
      else if (key == "max_steps") s.cfg.max_steps = std::stoi(value);
      else if (key == "workers") s.cfg.workers = std::stoi(value);
      else if (key == "embedding") s.arch.embedding = std::stoi(value);
      else if (key == "input_width") s.arch.input_width = std::stoi(value);
      else if (key == "input_height") s.arch.input_height = std::stoi(value);
      else if (key == "hidden") s.arch.hidden = std::stoi(value);
      else if (key == "feature") s.arch.feature = std::stoi(value);
      else if (key == "projector") s.arch.projector = std::stoi(value);
      else throw UsageError(path.string() + ": unknown key " + key);
    } catch (const std::logic_error&) {
      throw UsageError(path.string() + ": bad value for " + key + ": " + value);
    }
  }
  try {
    tiny::validate_config(s.cfg);
  } catch (const ConfigError& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
  return s;
}

void record_train_config(Manifest& m, const tiny::TrainConfig& c, const tiny::Architecture& a) {
  m.set("config.batch_size", c.batch_size);
  m.set("config.learning_rate", c.learning_rate);
  m.set("config.weight_decay", c.weight_decay);
  m.set("config.epochs", c.epochs);
  m.set("config.lambda", c.lambda);
  m.set("config.seed", static_cast<unsigned long long>(c.seed));
  m.set("config.max_steps", c.max_steps);
  m.set("config.embedding", a.embedding);
  m.set("config.input", std::to_string(a.input_width) + "x" + std::to_string(a.input_height));
}

// Synthetic soil images admitted by the soil-bank rule at `theta`.
SoilBank synthetic_bank(std::uint64_t seed, double theta, int width, int height) {
  return build_soil_bank(synthetic_soil_images(48, width, height, seed), theta);
}

// ---------------------------------------------------------------------------
// augment

struct AugmentOptions {
  std::string input, output, policy, manifest;
  std::optional<std::uint64_t> seed;
  int workers = 1;
};

int cmd_augment(const AugmentOptions& o, Manifest& m) {
  m.set("input", o.input);
  m.set("output", o.output);
  m.set("policy_file", o.policy);
  m.set("workers", o.workers);
  if (o.workers < 1) throw UsageError("--workers must be >= 1");
  Policy policy = read_policy(o.policy);
  if (o.seed) policy.master_seed = *o.seed;
  m.set("seed", static_cast<unsigned long long>(policy.master_seed));
  m.set("policy", policy_summary(policy));
  m.set("theta", policy.theta);

  std::optional<SoilBank> soil = policy_soil(policy, o.policy);
  if (needs_soil(policy) && (!soil || soil->empty())) {
    throw UsageError("policy uses background_invariance but soil_bank is unset or empty");
  }
  const auto files = list_files(o.input, ".ppm");
  fs::create_directories(o.output);

  const auto start = Clock::now();
  std::vector<int> failed(files.size(), 0);
  std::vector<std::string> errors(files.size());
  const SoilBank* bank = soil ? &*soil : nullptr;
  parallel_for(files.size(), o.workers, [&](std::size_t i) {
    try {
      const ImageU8 img = read_ppm(files[i]);
      const auto [v1, v2] = make_views(img, policy, i, bank);
      const std::string stem = files[i].stem().string();
      write_ppm(fs::path(o.output) / (stem + ".v1.ppm"), v1);
      write_ppm(fs::path(o.output) / (stem + ".v2.ppm"), v2);
    } catch (const std::exception& e) {
      failed[i] = 1;
      errors[i] = files[i].filename().string() + ": " + e.what();
    }
  });
  const double elapsed = seconds_since(start);

  std::size_t n_failed = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (failed[i]) {
      ++n_failed;
      std::cerr << "augment: " << errors[i] << "\n";
    }
  }
  m.set("images", files.size());
  m.set("failed", n_failed);
  m.set("views_written", 2 * (files.size() - n_failed));
  m.set("wall_seconds", elapsed);
  m.set("images_per_second", elapsed > 0 ? static_cast<double>(files.size()) / elapsed : 0.0);
  std::cout << "augmented " << files.size() - n_failed << "/" << files.size() << " images\n";
  return n_failed == 0 ? kExitOk : kExitRuntime;
}

// ---------------------------------------------------------------------------
// soilbank

struct SoilbankOptions {
  std::string input, output, manifest;
  double theta = kDefaultTheta;
  double max_fraction = kSoilMaxFraction;
};

int cmd_soilbank(const SoilbankOptions& o, Manifest& m) {
  m.set("input", o.input);
  m.set("output", o.output);
  m.set("theta", o.theta);
  m.set("max_fraction", o.max_fraction);
  const auto files = list_files(o.input, ".ppm");
  fs::create_directories(o.output);
  std::ostringstream index;
  std::size_t admitted = 0;
  std::size_t failed = 0;
  for (const auto& f : files) {
    try {
      const auto bytes = read_file(f);
      const double frac = vegetation_fraction(vegetation_mask(load_ppm(bytes), o.theta));
      if (frac < o.max_fraction) {
        write_file(fs::path(o.output) / f.filename(), bytes);
        index << f.filename().string() << " " << frac << "\n";
        ++admitted;
      }
    } catch (const std::exception& e) {
      ++failed;
      std::cerr << "soilbank: " << f.filename().string() << ": " << e.what() << "\n";
    }
  }
  write_text(fs::path(o.output) / "index.txt", index.str());
  m.set("images", files.size());
  m.set("admitted", admitted);
  m.set("failed", failed);
  std::cout << "admitted " << admitted << "/" << files.size() << " images\n";
  return failed == 0 ? kExitOk : kExitRuntime;
}

// ---------------------------------------------------------------------------
// pretrain

struct PretrainOptions {
  std::string data, policy, config, out, trace, manifest;
  std::optional<std::size_t> synthetic;
};

int cmd_pretrain(const PretrainOptions& o, Manifest& m) {
  if (o.data.empty() == !o.synthetic.has_value()) {
    throw UsageError("exactly one of --data or --synthetic is required");
  }
  const TrainSetup setup = read_train_config(o.config);
  record_train_config(m, setup.cfg, setup.arch);
  Policy policy = o.policy.empty() ? default_policy() : read_policy(o.policy);
  m.set("policy", policy_summary(policy));
  m.set("policy_file", o.policy);
  m.set("seed", static_cast<unsigned long long>(policy.master_seed));

  std::vector<ImageU8> data;
  std::optional<SoilBank> soil = o.policy.empty() ? std::nullopt : policy_soil(policy, o.policy);
  if (o.synthetic) {
    m.set("data", "synthetic:" + std::to_string(*o.synthetic));
    data = synthetic_corpus(*o.synthetic, setup.arch.input_width, setup.arch.input_height,
                            setup.cfg.seed);
    if (!soil && needs_soil(policy)) {
      soil = synthetic_bank(setup.cfg.seed, policy.theta, setup.arch.input_width,
                            setup.arch.input_height);
    }
  } else {
    m.set("data", o.data);
    for (const auto& f : list_files(o.data, ".ppm")) data.push_back(read_ppm(f));
    if (!soil && needs_soil(policy)) soil = build_soil_bank(data, policy.theta);
  }
  if (needs_soil(policy) && (!soil || soil->empty())) {
    throw UsageError("policy uses background_invariance but no soil image qualifies");
  }
  m.set("soil_bank_size", soil ? soil->size() : std::size_t{0});
  m.set("images", data.size());
  if (data.size() < static_cast<std::size_t>(setup.cfg.batch_size)) {
    throw UsageError("dataset has fewer images than batch_size");
  }

  const auto start = Clock::now();
  const auto result =
      tiny::pretrain(data, policy, soil ? &*soil : nullptr, setup.cfg, setup.arch);
  const double elapsed = seconds_since(start);

  write_file(o.out, save_checkpoint(result.checkpoint));
  const fs::path trace = o.trace.empty() ? fs::path(o.out + ".loss.csv") : fs::path(o.trace);
  write_text(trace, tiny::trace_csv(result.trace));
  m.set("checkpoint", o.out);
  m.set("trace", trace.string());
  m.set("steps", static_cast<unsigned long long>(result.checkpoint.step));
  if (!result.trace.empty()) {
    m.set("final_loss", result.trace.back().loss);
    m.set("final_diag_mean", result.trace.back().diag_mean);
    m.set("final_offdiag_mean", result.trace.back().offdiag_mean);
  }
  m.set("wall_seconds", elapsed);
  std::cout << "trained " << result.checkpoint.step << " steps in " << elapsed << " s\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckOptions {
  int trials = 100;
  int model_trials = 20;
  std::uint64_t seed = 1;
  double h = kGradCheckStep;
  std::string manifest;
};

int cmd_gradcheck(const GradcheckOptions& o, Manifest& m) {
  m.set("trials", o.trials);
  m.set("model_trials", o.model_trials);
  m.set("seed", static_cast<unsigned long long>(o.seed));
  m.set("h", o.h);
  double worst_loss = 0.0;
  int failures = 0;
  for (int t = 0; t < o.trials; ++t) {
    const auto r = loss_gradcheck_trial(derive_seed(o.seed, static_cast<std::uint64_t>(t)), o.h);
    worst_loss = std::max(worst_loss, r.max_relative_error);
    const bool ok = r.max_relative_error < kLossGradTolerance;
    failures += !ok;
    std::cout << "loss trial " << t << " n=" << r.n << " d=" << r.d
              << " max_rel_err=" << r.max_relative_error << (ok ? "" : "  FAIL") << "\n";
  }
  double worst_model = 0.0;
  double worst_coord = 0.0;
  std::size_t skipped = 0;
  for (int t = 0; t < o.model_trials; ++t) {
    const auto r = model_gradcheck_trial(derive_seed(o.seed ^ 0x4D4F44454CULL, t), o.h);
    worst_model = std::max(worst_model, r.relative_error);
    worst_coord = std::max(worst_coord, r.max_coord_relative_error);
    skipped += r.skipped_kinks;
    const bool ok = r.relative_error < kModelGradTolerance;
    failures += !ok;
    std::cout << "model trial " << t << " checked=" << r.checked << " kinks=" << r.skipped_kinks
              << " rel_err=" << r.relative_error << " max_coord_rel_err=" << r.max_coord_relative_error
              << (ok ? "" : "  FAIL") << "\n";
  }
  m.set("loss_max_rel_err", worst_loss);
  m.set("model_max_coord_rel_err", worst_coord);
  m.set("model_rel_err", worst_model);
  m.set("model_skipped_kinks", skipped);
  m.set("failures", failures);
  return failures == 0 ? kExitOk : kExitRuntime;
}

// ---------------------------------------------------------------------------
// bench

struct BenchOptions {
  std::string input, policy, manifest;
  std::optional<std::size_t> synthetic;
  int workers = 1;
  int repeat = 3;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_bench(const BenchOptions& o, Manifest& m) {
  if (o.repeat < 1) throw UsageError("--repeat must be >= 1");
  if (o.workers < 1) throw UsageError("--workers must be >= 1");
  if (o.input.empty() == !o.synthetic.has_value()) {
    throw UsageError("exactly one of --input or --synthetic is required");
  }
  Policy policy = o.policy.empty() ? default_policy() : read_policy(o.policy);
  std::vector<ImageU8> images;
  std::optional<SoilBank> soil = o.policy.empty() ? std::nullopt : policy_soil(policy, o.policy);
  if (o.synthetic) {
    images = synthetic_corpus(*o.synthetic, 64, 64, policy.master_seed);
    if (!soil) soil = synthetic_bank(policy.master_seed, policy.theta, 64, 64);
  } else {
    for (const auto& f : list_files(o.input, ".ppm")) images.push_back(read_ppm(f));
    if (!soil) soil = build_soil_bank(images, policy.theta);
  }
  if (needs_soil(policy) && soil->empty()) throw UsageError("no soil image qualifies for the bank");
  m.set("images", images.size());
  m.set("workers", o.workers);
  m.set("repeat", o.repeat);
  m.set("policy", policy_summary(policy));
  if (images.empty()) {
    std::cout << "no images\n";
    return kExitOk;
  }

  auto time_it = [&](auto&& fn) {
    std::vector<double> runs;
    for (int r = 0; r < o.repeat; ++r) {
      const auto start = Clock::now();
      parallel_for(images.size(), o.workers, fn);
      runs.push_back(seconds_since(start));
    }
    const double t = median(runs);
    return t > 0 ? static_cast<double>(images.size()) / t : 0.0;
  };

  std::cout << "stage,images_per_second\n";
  for (const auto& entry : policy.entries) {
    if (entry.name == Augmentation::kBackgroundInvariance && soil->empty()) continue;
    const double rate = time_it([&](std::size_t i) {
      RandomStream rng(derive_seed(policy.master_seed, i));
      const ImageU8 out = apply_entry(images[i], entry, policy, rng, &*soil);
      (void)out;
    });
    const std::string name(augmentation_name(entry.name));
    m.set("images_per_second." + name, rate);
    std::cout << name << "," << rate << "\n";
  }
  const double e2e = time_it([&](std::size_t i) {
    const auto views = make_views(images[i], policy, i, &*soil);
    (void)views;
  });
  m.set("images_per_second.end_to_end", e2e);
  std::cout << "end_to_end," << e2e << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// order-sweep

struct SweepOptions {
  bool pairs = false;
  bool full = false;
  bool metric_proxy = true;
  std::string policy, data, out, long_out, subset, manifest;
  std::optional<std::size_t> synthetic;
  int steps = 40;
  int batch = 32;
  double learning_rate = 0.02;
  double lambda = kDeskLambda;
  int workers = 1;
};

struct SweepCell {
  std::vector<Augmentation> order;
  tiny::CorrelationStats stats;
  double loss = 0.0;
};

int cmd_order_sweep(const SweepOptions& o, Manifest& m) {
  if (o.pairs == o.full) throw UsageError("exactly one of --pairs or --full is required");
  if (!o.data.empty() && o.synthetic) throw UsageError("--data and --synthetic are exclusive");
  const Policy base = o.policy.empty() ? default_policy() : read_policy(o.policy);
  tiny::Architecture arch;
  tiny::TrainConfig cfg;
  cfg.batch_size = o.batch;
  cfg.max_steps = o.steps;
  cfg.epochs = 1 << 20;
  cfg.learning_rate = o.learning_rate;
  cfg.lambda = o.lambda;
  cfg.seed = base.master_seed;
  cfg.workers = o.workers;
  tiny::validate_config(cfg);

  std::vector<ImageU8> data;
  std::optional<SoilBank> soil = o.policy.empty() ? std::nullopt : policy_soil(base, o.policy);
  if (!o.data.empty()) {
    for (const auto& f : list_files(o.data, ".ppm")) data.push_back(read_ppm(f));
    if (!soil) soil = build_soil_bank(data, base.theta);
    m.set("data", o.data);
  } else {
    const std::size_t n = o.synthetic.value_or(256);
    data = synthetic_corpus(n, arch.input_width, arch.input_height, base.master_seed);
    if (!soil) soil = synthetic_bank(base.master_seed, base.theta, arch.input_width, arch.input_height);
    m.set("data", "synthetic:" + std::to_string(n));
  }
  if (data.size() < static_cast<std::size_t>(cfg.batch_size) + 2) {
    throw UsageError("order sweep needs more images than the batch size");
  }
  // Hold out a probe batch from the end of the sorted corpus.
  const std::size_t probe_n = std::min<std::size_t>(32, data.size() / 4);
  const std::vector<ImageU8> probe(data.end() - static_cast<std::ptrdiff_t>(probe_n), data.end());
  data.resize(data.size() - probe_n);
  if (data.size() < static_cast<std::size_t>(cfg.batch_size)) {
    throw UsageError("not enough images left after holding out the probe batch");
  }

  std::vector<Augmentation> pool(kAllAugmentations.begin(), kAllAugmentations.end());
  if (!o.subset.empty()) {
    pool.clear();
    std::istringstream in(o.subset);
    std::string name;
    while (std::getline(in, name, ',')) {
      const auto a = parse_augmentation(name);
      if (!a) throw UsageError("unknown augmentation in --subset: " + name);
      pool.push_back(*a);
    }
  }

  std::vector<std::vector<Augmentation>> orders;
  if (o.pairs) {
    for (const auto first : pool) {
      for (const auto second : pool) {
        orders.push_back(first == second ? std::vector{first} : std::vector{first, second});
      }
    }
  } else {
    std::vector<Augmentation> perm = pool;
    std::sort(perm.begin(), perm.end());
    do {
      orders.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  for (const auto& order : orders) {
    if (std::find(order.begin(), order.end(), Augmentation::kBackgroundInvariance) != order.end() &&
        (!soil || soil->empty())) {
      throw UsageError("sweep includes background_invariance but no soil image qualifies");
    }
  }

  const auto start = Clock::now();
  std::vector<SweepCell> cells;
  for (const auto& order : orders) {
    Policy p;
    p.master_seed = base.master_seed;
    p.theta = base.theta;
    for (const auto a : order) {
      PolicyEntry e{a, 1.0, {}};
      if (const auto* b = base.find(a)) e.params = b->params;
      p.entries.push_back(e);
    }
    const SoilBank* bank = soil ? &*soil : nullptr;
    const auto result = tiny::pretrain(data, p, bank, cfg, arch);
    const tiny::TinyModel model = result.checkpoint.model();
    const auto [x1, x2] = tiny::view_batches(probe, p, bank, arch, 1ULL << 40, o.workers);
    SweepCell cell{order, tiny::probe_correlation(model, x1, x2),
                   tiny::composite_loss(model, x1, x2, twins::BTLossConfig{cfg.lambda})};
    std::string label;
    for (const auto a : order) label += (label.empty() ? "" : ">") + std::string(augmentation_name(a));
    std::cerr << "order-sweep: " << label << " offdiag=" << cell.stats.offdiag_mean
              << " diag=" << cell.stats.diag_mean << " loss=" << cell.loss << "\n";
    cells.push_back(cell);
  }
  const double elapsed = seconds_since(start);

  std::ostringstream grid;
  grid.precision(10);
  if (o.pairs) {
    grid << "first\\second";
    for (const auto a : pool) grid << "," << augmentation_name(a);
    grid << "\n";
    for (std::size_t r = 0; r < pool.size(); ++r) {
      grid << augmentation_name(pool[r]);
      for (std::size_t c = 0; c < pool.size(); ++c) grid << "," << cells[r * pool.size() + c].stats.offdiag_mean;
      grid << "\n";
    }
  } else {
    grid << "order,offdiag_mean,diag_mean,loss\n";
    for (const auto& cell : cells) {
      std::string label;
      for (const auto a : cell.order) label += (label.empty() ? "" : ">") + std::string(augmentation_name(a));
      grid << label << "," << cell.stats.offdiag_mean << "," << cell.stats.diag_mean << "," << cell.loss << "\n";
    }
  }
  write_text(o.out, grid.str());

  if (!o.long_out.empty()) {
    std::ostringstream lng;
    lng.precision(10);
    lng << "first,second,offdiag_mean,diag_mean,loss\n";
    for (const auto& cell : cells) {
      const auto first = augmentation_name(cell.order.front());
      const auto second = cell.order.size() > 1 ? augmentation_name(cell.order[1]) : first;
      lng << first << "," << second << "," << cell.stats.offdiag_mean << "," << cell.stats.diag_mean
          << "," << cell.loss << "\n";
    }
    write_text(o.long_out, lng.str());
  }
  m.set("mode", o.pairs ? "pairs" : "full");
  m.set("metric", "proxy:offdiag_mean");
  m.set("cells", cells.size());
  m.set("steps_per_cell", o.steps);
  m.set("batch", o.batch);
  m.set("out", o.out);
  m.set("wall_seconds", elapsed);
  std::cout << "wrote " << cells.size() << " cells to " << o.out << " in " << elapsed << " s\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::string task, pred, gt, csv, manifest;
  double threshold = 0.5;
};

metrics::InstanceSet read_instance_dir(const fs::path& dir) {
  std::map<std::string, double> scores;
  const fs::path score_file = dir / "scores.txt";
  if (fs::exists(score_file)) {
    std::istringstream in(read_text(score_file));
    std::string name;
    double score = 0.0;
    while (in >> name >> score) scores[name] = score;
  }
  metrics::InstanceSet set;
  for (const auto& f : list_files(dir, ".pgm")) {
    metrics::Instance inst{read_pgm(f), std::nullopt};
    if (const auto it = scores.find(f.filename().string()); it != scores.end()) inst.score = it->second;
    set.push_back(std::move(inst));
  }
  return set;
}

std::vector<std::string> subdirs(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_eval(const EvalOptions& o, Manifest& m) {
  m.set("task", o.task);
  m.set("pred", o.pred);
  m.set("gt", o.gt);
  std::ostringstream csv;
  csv.precision(10);
  if (o.task == "semantic") {
    metrics::ConfusionMatrix total{};
    const auto gt_files = list_files(o.gt, ".pgm");
    for (const auto& g : gt_files) {
      const fs::path p = fs::path(o.pred) / g.filename();
      if (!fs::exists(p)) throw std::runtime_error("missing prediction for " + g.filename().string());
      metrics::accumulate(total, metrics::confusion_matrix(metrics::LabelMap(read_pgm(p)),
                                                           metrics::LabelMap(read_pgm(g))));
    }
    const double miou = metrics::miou(total);
    const double mp = metrics::mean_precision(total);
    const double mr = metrics::mean_recall(total);
    const auto ious = metrics::per_class_iou(total);
    std::cout << "images=" << gt_files.size() << "\nmIoU=" << miou << "\nmP=" << mp << "\nmR=" << mr << "\n";
    const char* names[] = {"soil", "crop", "weed"};
    csv << "metric,value\nmIoU," << miou << "\nmP," << mp << "\nmR," << mr << "\n";
    for (int c = 0; c < metrics::kNumClasses; ++c) {
      std::ostringstream v;
      v.precision(10);
      if (ious[c]) v << *ious[c];
      else v << "nan";
      std::cout << "IoU_" << names[c] << "=" << v.str() << "\n";
      csv << "IoU_" << names[c] << "," << v.str() << "\n";
    }
    m.set("images", gt_files.size());
    m.set("miou", miou);
    m.set("mean_precision", mp);
    m.set("mean_recall", mr);
  } else if (o.task == "instance") {
    std::vector<std::string> sets = subdirs(o.gt);
    const bool nested = !sets.empty();
    if (!nested) sets = {""};
    double ap = 0.0, ar = 0.0;
    std::vector<std::pair<std::int64_t, std::int64_t>> counts;
    for (const auto& s : sets) {
      const auto gt = read_instance_dir(fs::path(o.gt) / s);
      const fs::path pred_dir = fs::path(o.pred) / s;
      if (!fs::is_directory(pred_dir)) throw std::runtime_error("missing prediction set " + pred_dir.string());
      const auto pred = read_instance_dir(pred_dir);
      const auto r = metrics::instance_ap_ar(pred, gt, o.threshold);
      ap += r.ap;
      ar += r.ar;
      counts.emplace_back(static_cast<std::int64_t>(pred.size()), static_cast<std::int64_t>(gt.size()));
    }
    ap /= static_cast<double>(sets.size());
    ar /= static_cast<double>(sets.size());
    const double dic = metrics::mean_abs_dic(counts);
    std::cout << "sets=" << sets.size() << "\nAP=" << ap << "\nAR=" << ar << "\n|DiC|=" << dic << "\n";
    csv << "metric,value\nAP," << ap << "\nAR," << ar << "\nabs_dic," << dic << "\n";
    m.set("sets", sets.size());
    m.set("ap", ap);
    m.set("ar", ar);
    m.set("abs_dic", dic);
    m.set("iou_threshold", o.threshold);
  } else {
    throw UsageError("--task must be semantic or instance");
  }
  if (!o.csv.empty()) write_text(o.csv, csv.str());
  std::cout << "\n" << csv.str();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Deterministic augmentation pipeline and redundancy-reduction pretraining"};
  app.require_subcommand(1);

  AugmentOptions aug;
  auto* augment = app.add_subcommand("augment", "Write two augmented views per input image");
  augment->add_option("--input", aug.input, "Directory of .ppm images")->required();
  augment->add_option("--output", aug.output, "Output directory")->required();
  augment->add_option("--policy", aug.policy, "Policy file")->required();
  augment->add_option("--seed", aug.seed, "Override the policy master seed");
  augment->add_option("--workers", aug.workers, "Worker threads");
  augment->add_option("--manifest", aug.manifest, "Manifest path (default <output>/manifest.txt)");

  SoilbankOptions sb;
  auto* soilbank = app.add_subcommand("soilbank", "Select low-vegetation images as paste targets");
  soilbank->add_option("--input", sb.input)->required();
  soilbank->add_option("--output", sb.output)->required();
  soilbank->add_option("--theta", sb.theta, "Excess-green threshold");
  soilbank->add_option("--max-fraction", sb.max_fraction, "Admission bound on vegetation fraction");
  soilbank->add_option("--manifest", sb.manifest);

  PretrainOptions pt;
  auto* pretrain = app.add_subcommand("pretrain", "Desk-scale self-supervised pretraining");
  pretrain->add_option("--data", pt.data, "Directory of .ppm images");
  pretrain->add_option("--synthetic", pt.synthetic, "Generate N synthetic plant images");
  pretrain->add_option("--policy", pt.policy, "Policy file (default policy when omitted)");
  pretrain->add_option("--config", pt.config, "Training config (key=value)");
  pretrain->add_option("--out", pt.out, "Checkpoint path")->required();
  pretrain->add_option("--trace", pt.trace, "Loss CSV (default <out>.loss.csv)");
  pretrain->add_option("--manifest", pt.manifest);

  GradcheckOptions gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradients");
  gradcheck->add_option("--trials", gc.trials, "Loss-level trials");
  gradcheck->add_option("--model-trials", gc.model_trials, "Full-model trials");
  gradcheck->add_option("--seed", gc.seed);
  gradcheck->add_option("--step", gc.h, "Central-difference step");
  gradcheck->add_option("--manifest", gc.manifest);

  BenchOptions bo;
  auto* bench = app.add_subcommand("bench", "Throughput per augmentation stage");
  bench->add_option("--input", bo.input);
  bench->add_option("--synthetic", bo.synthetic, "Generate N synthetic 64x64 images");
  bench->add_option("--policy", bo.policy);
  bench->add_option("--workers", bo.workers);
  bench->add_option("--repeat", bo.repeat);
  bench->add_option("--manifest", bo.manifest);

  SweepOptions so;
  auto* sweep = app.add_subcommand("order-sweep", "Pretrain on every augmentation ordering");
  sweep->add_flag("--pairs", so.pairs, "Ordered pairs plus single-augmentation diagonal");
  sweep->add_flag("--full", so.full, "All permutations of --subset");
  sweep->add_option("--policy", so.policy);
  sweep->add_option("--data", so.data);
  sweep->add_option("--synthetic", so.synthetic);
  sweep->add_flag("--metric-proxy", so.metric_proxy, "Report the correlation proxy (only option)");
  sweep->add_option("--subset", so.subset, "Comma-separated augmentation names");
  sweep->add_option("--steps", so.steps, "Training steps per cell");
  sweep->add_option("--batch", so.batch);
  sweep->add_option("--lr", so.learning_rate);
  sweep->add_option("--lambda", so.lambda, "Redundancy weight (default 1/D for D = 8)");
  sweep->add_option("--workers", so.workers);
  sweep->add_option("--out", so.out, "Grid CSV")->required();
  sweep->add_option("--long", so.long_out, "Long-form CSV");
  sweep->add_option("--manifest", so.manifest);

  EvalOptions eo;
  auto* eval = app.add_subcommand("eval", "Segmentation metrics");
  eval->add_option("--task", eo.task)->required()->check(CLI::IsMember({"semantic", "instance"}));
  eval->add_option("--pred", eo.pred)->required();
  eval->add_option("--gt", eo.gt)->required();
  eval->add_option("--csv", eo.csv);
  eval->add_option("--threshold", eo.threshold, "Instance IoU threshold");
  eval->add_option("--manifest", eo.manifest);

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Manifest manifest;
  fs::path manifest_path;
  std::string command;
  std::function<int(Manifest&)> body;
  if (augment->parsed()) {
    command = "augment";
    manifest_path = aug.manifest.empty() ? fs::path(aug.output) / "manifest.txt" : fs::path(aug.manifest);
    body = [&](Manifest& m) { return cmd_augment(aug, m); };
  } else if (soilbank->parsed()) {
    command = "soilbank";
    manifest_path = sb.manifest.empty() ? fs::path(sb.output) / "manifest.txt" : fs::path(sb.manifest);
    body = [&](Manifest& m) { return cmd_soilbank(sb, m); };
  } else if (pretrain->parsed()) {
    command = "pretrain";
    manifest_path = pt.manifest.empty() ? fs::path(pt.out + ".manifest.txt") : fs::path(pt.manifest);
    body = [&](Manifest& m) { return cmd_pretrain(pt, m); };
  } else if (gradcheck->parsed()) {
    command = "gradcheck";
    manifest_path = gc.manifest.empty() ? fs::path("gradcheck.manifest.txt") : fs::path(gc.manifest);
    body = [&](Manifest& m) { return cmd_gradcheck(gc, m); };
  } else if (bench->parsed()) {
    command = "bench";
    manifest_path = bo.manifest.empty() ? fs::path("bench.manifest.txt") : fs::path(bo.manifest);
    body = [&](Manifest& m) { return cmd_bench(bo, m); };
  } else if (sweep->parsed()) {
    command = "order-sweep";
    manifest_path = so.manifest.empty() ? fs::path(so.out + ".manifest.txt") : fs::path(so.manifest);
    body = [&](Manifest& m) { return cmd_order_sweep(so, m); };
  } else {
    command = "eval";
    manifest_path = eo.manifest.empty() ? fs::path("eval.manifest.txt") : fs::path(eo.manifest);
    body = [&](Manifest& m) { return cmd_eval(eo, m); };
  }

  manifest.set("command", command);
  std::string argv_joined;
  for (std::size_t i = 1; i < args.size(); ++i) argv_joined += (i > 1 ? " " : "") + args[i];
  manifest.set("argv", argv_joined);

  int code = kExitOk;
  try {
    code = body(manifest);
    manifest.set("status", code == kExitOk ? "ok" : "failed");
  } catch (const UsageError& e) {
    std::cerr << command << ": " << e.what() << "\n";
    manifest.set("status", "usage_error");
    manifest.set("error", e.what());
    code = kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << command << ": " << e.what() << "\n";
    manifest.set("status", "config_error");
    manifest.set("error", e.what());
    code = kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << command << ": " << e.what() << "\n";
    manifest.set("status", "runtime_error");
    manifest.set("error", e.what());
    code = kExitRuntime;
  }
  manifest.set("exit_code", code);
  try {
    manifest.write(manifest_path);
  } catch (const std::exception& e) {
    std::cerr << command << ": " << e.what() << "\n";
  }
  return code;
}

}  // namespace agrissl::cli

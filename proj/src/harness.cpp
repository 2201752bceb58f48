#include "drgrad/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <thread>

namespace drgrad {
namespace {

using nlohmann::json;

void require_keys(const json& j, const std::string& section,
                  std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) { ok = true; break; }
    if (!ok)
      throw ConfigError("unknown key '" + item.key() + "' in config section '" +
                        section + "'");
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

std::string resolve_data_path(const std::string& path) {
  namespace fs = std::filesystem;
  if (path.empty() || fs::path(path).is_absolute()) return path;
  if (const char* root = std::getenv("DRGRAD_DATA_DIR"))
    return (fs::path(root) / path).string();
  return path;
}

std::uint64_t fnv1a_str(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Round-robin over classes so the loss subset stays balanced.
std::vector<const Example*> stratified_eval_subset(const Dataset& ds,
                                                   int target_size) {
  std::vector<const Example*> out;
  if (target_size <= 0 || target_size >= ds.size()) {
    for (const Example& e : ds.examples) out.push_back(&e);
    return out;
  }
  for (std::size_t k = 0; static_cast<int>(out.size()) < target_size; ++k) {
    bool any = false;
    for (int c = 0; c < ds.num_classes && static_cast<int>(out.size()) < target_size; ++c) {
      const auto& pool = ds.per_class_index[c];
      if (k < pool.size()) {
        out.push_back(&ds.examples[pool[k]]);
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds must be nonempty");
  if (total_iterations < 1)
    throw ConfigError("total_iterations must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  optimizer.validate();
  if (dataset.type != "idx" && dataset.type != "synth")
    throw ConfigError("dataset.type must be 'idx' or 'synth'");
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  require_keys(j, "<root>",
               {"dataset", "model", "schedule", "optimizer", "batch_size",
                "total_iterations", "eval_every", "train_eval_size", "seeds",
                "output_dir"});
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    require_keys(d, "dataset",
                 {"type", "train_images", "train_labels", "test_images",
                  "test_labels", "per_class_train", "per_class_test",
                  "subsample_seed", "num_classes", "n_per_class_train",
                  "n_per_class_test", "dim", "separation", "synth_seed"});
    get_if(d, "type", cfg.dataset.type);
    get_if(d, "train_images", cfg.dataset.train_images);
    get_if(d, "train_labels", cfg.dataset.train_labels);
    get_if(d, "test_images", cfg.dataset.test_images);
    get_if(d, "test_labels", cfg.dataset.test_labels);
    get_if(d, "per_class_train", cfg.dataset.per_class_train);
    get_if(d, "per_class_test", cfg.dataset.per_class_test);
    get_if(d, "subsample_seed", cfg.dataset.subsample_seed);
    get_if(d, "num_classes", cfg.dataset.num_classes);
    get_if(d, "n_per_class_train", cfg.dataset.n_per_class_train);
    get_if(d, "n_per_class_test", cfg.dataset.n_per_class_test);
    get_if(d, "dim", cfg.dataset.dim);
    get_if(d, "separation", cfg.dataset.separation);
    get_if(d, "synth_seed", cfg.dataset.synth_seed);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    require_keys(m, "model", {"kind", "hidden_dim"});
    if (m.contains("kind"))
      cfg.model_kind = model_kind_from_string(m.at("kind").get<std::string>());
    get_if(m, "hidden_dim", cfg.hidden_dim);
  }
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    require_keys(s, "schedule",
                 {"kind", "skew_prob", "skewed_class", "rotation_period"});
    if (s.contains("kind"))
      cfg.schedule.kind = skew_kind_from_string(s.at("kind").get<std::string>());
    get_if(s, "skew_prob", cfg.schedule.skew_prob);
    get_if(s, "skewed_class", cfg.schedule.skewed_class);
    get_if(s, "rotation_period", cfg.schedule.rotation_period);
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    require_keys(o, "optimizer",
                 {"kind", "lr", "snapshot_period", "momentum_gamma",
                  "momentum_eta", "alpha", "beta", "weight_mode",
                  "misspec_seed", "momentum_update_first", "table_cap_mb"});
    if (o.contains("kind"))
      cfg.optimizer.kind = opt_kind_from_string(o.at("kind").get<std::string>());
    get_if(o, "lr", cfg.optimizer.lr);
    get_if(o, "snapshot_period", cfg.optimizer.snapshot_period);
    get_if(o, "momentum_gamma", cfg.optimizer.momentum_gamma);
    get_if(o, "momentum_eta", cfg.optimizer.momentum_eta);
    get_if(o, "alpha", cfg.optimizer.alpha);
    get_if(o, "beta", cfg.optimizer.beta);
    if (o.contains("weight_mode"))
      cfg.optimizer.weight_mode =
          weight_mode_from_string(o.at("weight_mode").get<std::string>());
    get_if(o, "misspec_seed", cfg.optimizer.misspec_seed);
    get_if(o, "momentum_update_first", cfg.optimizer.momentum_update_first);
    get_if(o, "table_cap_mb", cfg.optimizer.table_cap_mb);
  }
  get_if(j, "batch_size", cfg.batch_size);
  get_if(j, "total_iterations", cfg.total_iterations);
  get_if(j, "eval_every", cfg.eval_every);
  get_if(j, "train_eval_size", cfg.train_eval_size);
  get_if(j, "seeds", cfg.seeds);
  get_if(j, "output_dir", cfg.output_dir);
  cfg.validate();
  return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
  json d = {{"type", cfg.dataset.type},
            {"train_images", cfg.dataset.train_images},
            {"train_labels", cfg.dataset.train_labels},
            {"test_images", cfg.dataset.test_images},
            {"test_labels", cfg.dataset.test_labels},
            {"per_class_train", cfg.dataset.per_class_train},
            {"per_class_test", cfg.dataset.per_class_test},
            {"subsample_seed", cfg.dataset.subsample_seed},
            {"num_classes", cfg.dataset.num_classes},
            {"n_per_class_train", cfg.dataset.n_per_class_train},
            {"n_per_class_test", cfg.dataset.n_per_class_test},
            {"dim", cfg.dataset.dim},
            {"separation", cfg.dataset.separation},
            {"synth_seed", cfg.dataset.synth_seed}};
  json m = {{"kind", to_string(cfg.model_kind)},
            {"hidden_dim", cfg.hidden_dim}};
  json s = {{"kind", to_string(cfg.schedule.kind)},
            {"skew_prob", cfg.schedule.skew_prob},
            {"skewed_class", cfg.schedule.skewed_class},
            {"rotation_period", cfg.schedule.rotation_period}};
  json o = {{"kind", to_string(cfg.optimizer.kind)},
            {"lr", cfg.optimizer.lr},
            {"snapshot_period", cfg.optimizer.snapshot_period},
            {"momentum_gamma", cfg.optimizer.momentum_gamma},
            {"momentum_eta", cfg.optimizer.momentum_eta},
            {"alpha", cfg.optimizer.alpha},
            {"beta", cfg.optimizer.beta},
            {"weight_mode", to_string(cfg.optimizer.weight_mode)},
            {"misspec_seed", cfg.optimizer.misspec_seed},
            {"momentum_update_first", cfg.optimizer.momentum_update_first},
            {"table_cap_mb", cfg.optimizer.table_cap_mb}};
  return {{"dataset", d},
          {"model", m},
          {"schedule", s},
          {"optimizer", o},
          {"batch_size", cfg.batch_size},
          {"total_iterations", cfg.total_iterations},
          {"eval_every", cfg.eval_every},
          {"train_eval_size", cfg.train_eval_size},
          {"seeds", cfg.seeds},
          {"output_dir", cfg.output_dir}};
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

std::uint64_t config_hash(const RunConfig& cfg) {
  json j = run_config_to_json(cfg);
  j.erase("output_dir");
  return fnv1a_str(j.dump());
}

Experiment load_experiment(const RunConfig& cfg) {
  cfg.validate();
  Experiment exp;
  exp.cfg = cfg;
  if (cfg.dataset.type == "idx") {
    exp.train = load_idx(resolve_data_path(cfg.dataset.train_images),
                         resolve_data_path(cfg.dataset.train_labels));
    exp.test = load_idx(resolve_data_path(cfg.dataset.test_images),
                        resolve_data_path(cfg.dataset.test_labels));
    if (cfg.dataset.per_class_train > 0)
      exp.train = subsample(exp.train, cfg.dataset.per_class_train,
                            cfg.dataset.subsample_seed);
    if (cfg.dataset.per_class_test > 0)
      exp.test = subsample(exp.test, cfg.dataset.per_class_test,
                           cfg.dataset.subsample_seed + 1);
  } else {
    exp.train = synth_blobs(cfg.dataset.num_classes,
                            cfg.dataset.n_per_class_train, cfg.dataset.dim,
                            cfg.dataset.separation, cfg.dataset.synth_seed);
    exp.test = synth_blobs(cfg.dataset.num_classes,
                           cfg.dataset.n_per_class_test, cfg.dataset.dim,
                           cfg.dataset.separation, cfg.dataset.synth_seed + 1);
  }
  exp.spec.kind = cfg.model_kind;
  exp.spec.input_dim = exp.train.feature_dim();
  exp.spec.hidden_dim = cfg.hidden_dim;
  exp.spec.num_classes = exp.train.num_classes;
  exp.spec.validate();
  exp.train_eval = stratified_eval_subset(exp.train, cfg.train_eval_size);
  exp.test_eval = stratified_eval_subset(exp.test, 0);
  exp.target = ClassDist::uniform(exp.train.num_classes);
  return exp;
}

namespace {

void write_csv_header(int num_classes, std::ostream& out) {
  out << "t,train_loss,test_acc,delta_norm";
  for (int c = 0; c < num_classes; ++c) out << ",count_" << c;
  out << "\n";
}

void write_csv_row(const EvalRow& row, std::ostream& out) {
  out.precision(17);
  out << row.t << ',' << row.train_loss << ',' << row.test_acc << ','
      << row.delta_norm;
  for (int c : row.class_counts) out << ',' << c;
  out << "\n";
  out.flush();
}

}  // namespace

RunRecord run_trajectory(const Experiment& exp, std::uint64_t seed,
                         std::ostream* csv_sink) {
  const auto t_start = std::chrono::steady_clock::now();
  const RunConfig& cfg = exp.cfg;
  RunRecord rec;
  rec.config_hash = config_hash(cfg);
  rec.seed = seed;
  if (csv_sink) write_csv_header(exp.train.num_classes, *csv_sink);

  Rng rng(seed);
  Vector theta = init_params(exp.spec, seed).theta;
  Optimizer opt(cfg.optimizer, exp.train.size(),
                static_cast<Eigen::Index>(theta.size()),
                exp.train.num_classes, theta);
  WeightModel wm{cfg.optimizer.weight_mode, cfg.optimizer.misspec_seed};
  GradFn grad_fn = [&exp](int i, const Vector& th) -> Vector {
    return grad(exp.spec, th, exp.train.examples[i]);
  };

  double last_delta_norm = 0.0;
  std::vector<int> last_counts(exp.train.num_classes, 0);
  auto emit_row = [&](long t) {
    EvalRow row;
    row.t = t;
    row.train_loss = evaluate(exp.spec, theta, exp.train_eval).mean_loss;
    row.test_acc = evaluate(exp.spec, theta, exp.test_eval).accuracy;
    row.delta_norm = last_delta_norm;
    row.class_counts = last_counts;
    if (csv_sink) write_csv_row(row, *csv_sink);
    rec.rows.push_back(std::move(row));
  };

  for (long t = 0; t < cfg.total_iterations; ++t) {
    if (t % cfg.eval_every == 0) emit_row(t);
    try {
      MiniBatch batch =
          draw_batch(exp.train, cfg.schedule, t, cfg.batch_size, rng);
      ClassWeights weights =
          weights_for(batch, wm, exp.target, cfg.schedule, t);
      GradEstimate est = opt.step(grad_fn, theta, batch, weights, t);
      theta = apply_update(theta, est, opt.effective_lr(), t);
      last_delta_norm = est.delta.norm();
      for (int c = 0; c < exp.train.num_classes; ++c)
        last_counts[c] = batch.class_count(c);
      rec.last_good_iteration = t;
    } catch (const NumericError&) {
      rec.failed = true;
      break;
    }
  }
  if (!rec.failed) emit_row(cfg.total_iterations);
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return rec;
}

void write_record_csv(const RunRecord& rec, int num_classes,
                      std::ostream& out) {
  write_csv_header(num_classes, out);
  for (const EvalRow& row : rec.rows) write_csv_row(row, out);
}

SuiteResult run_suite(const Experiment& exp) {
  namespace fs = std::filesystem;
  const RunConfig& cfg = exp.cfg;
  fs::create_directories(cfg.output_dir);

  SuiteResult result;
  result.output_dir = cfg.output_dir;
  result.records.resize(cfg.seeds.size());

  // One worker per seed; each writes only its own CSV.
  std::vector<std::thread> workers;
  for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
    workers.emplace_back([&, k] {
      const std::string path = (fs::path(cfg.output_dir) /
                                ("run_seed" + std::to_string(cfg.seeds[k]) +
                                 ".csv"))
                                   .string();
      std::ofstream csv(path);
      result.records[k] = run_trajectory(exp, cfg.seeds[k], &csv);
    });
  }
  for (auto& w : workers) w.join();
  for (const RunRecord& r : result.records) result.partial |= r.failed;

  // mean curve across seeds, deterministic reduce in seed order
  std::size_t min_rows = result.records[0].rows.size();
  for (const RunRecord& r : result.records)
    min_rows = std::min(min_rows, r.rows.size());
  {
    std::ofstream mean_csv(
        (fs::path(cfg.output_dir) / "mean_curve.csv").string());
    mean_csv << "t,mean_test_acc,std_test_acc\n";
    mean_csv.precision(17);
    const double n = static_cast<double>(result.records.size());
    for (std::size_t r = 0; r < min_rows; ++r) {
      double sum = 0.0, sumsq = 0.0;
      for (const RunRecord& rec : result.records) {
        sum += rec.rows[r].test_acc;
        sumsq += rec.rows[r].test_acc * rec.rows[r].test_acc;
      }
      const double mean = sum / n;
      const double var = std::max(0.0, sumsq / n - mean * mean);
      mean_csv << result.records[0].rows[r].t << ',' << mean << ','
               << std::sqrt(var) << "\n";
    }
  }

  nlohmann::json manifest = {
      {"config_hash", config_hash(cfg)},
      {"config", run_config_to_json(cfg)},
      {"seeds", cfg.seeds},
      {"train_digest", exp.train.source_digest},
      {"test_digest", exp.test.source_digest},
      {"partial", result.partial},
      {"version", "1.0"}};
  std::ofstream((fs::path(cfg.output_dir) / "manifest.json").string())
      << manifest.dump(2) << "\n";
  return result;
}

}  // namespace drgrad

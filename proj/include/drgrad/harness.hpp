#ifndef DRGRAD_HARNESS_HPP
#define DRGRAD_HARNESS_HPP

#include <iosfwd>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "drgrad/data_io.hpp"
#include "drgrad/optim.hpp"
#include "drgrad/sampling.hpp"

namespace drgrad {

struct DatasetConfig {
  std::string type = "synth";  // "idx" or "synth"
  // idx (relative paths resolve against $DRGRAD_DATA_DIR)
  std::string train_images, train_labels, test_images, test_labels;
  int per_class_train = 0;  // 0 = keep all
  int per_class_test = 0;
  std::uint64_t subsample_seed = 0;
  // synth
  int num_classes = 10;
  int n_per_class_train = 500;
  int n_per_class_test = 100;
  int dim = 784;
  double separation = 3.0;
  std::uint64_t synth_seed = 0;
};

struct RunConfig {
  DatasetConfig dataset;
  ModelKind model_kind = ModelKind::Mlp1Hidden;
  int hidden_dim = 100;
  SkewSchedule schedule;
  OptimizerConfig optimizer;
  int batch_size = 20;
  long total_iterations = 3000;
  long eval_every = 50;
  int train_eval_size = 1000;  // 0 = evaluate train loss on the full split
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_dir = "runs";

  void validate() const;
};

// Strict parse: unknown keys anywhere are a ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

// Hash over the canonical serialized config, output_dir excluded.
std::uint64_t config_hash(const RunConfig& cfg);

// Config plus loaded data, shared read-only across seed workers.
struct Experiment {
  RunConfig cfg;
  ModelSpec spec;
  Dataset train;
  Dataset test;
  std::vector<const Example*> train_eval;  // fixed stratified subset
  std::vector<const Example*> test_eval;
  ClassDist target;  // uniform over classes
};

Experiment load_experiment(const RunConfig& cfg);

struct EvalRow {
  long t = 0;
  double train_loss = 0.0;
  double test_acc = 0.0;
  double delta_norm = 0.0;
  std::vector<int> class_counts;  // batch composition at this iteration
};

struct RunRecord {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<EvalRow> rows;
  double wall_seconds = 0.0;
  bool failed = false;
  long last_good_iteration = -1;
};

// Full training loop for one seed. When csv_sink is given, rows stream to
// it as they are produced so a crashed run leaves a parseable prefix.
RunRecord run_trajectory(const Experiment& exp, std::uint64_t seed,
                         std::ostream* csv_sink = nullptr);

void write_record_csv(const RunRecord& rec, int num_classes, std::ostream& out);

struct SuiteResult {
  std::vector<RunRecord> records;
  bool partial = false;  // at least one seed failed
  std::string output_dir;
};

// Runs every seed (parallel workers), writes per-seed CSVs, the mean curve,
// and a JSON manifest into cfg.output_dir.
SuiteResult run_suite(const Experiment& exp);

}  // namespace drgrad

#endif  // DRGRAD_HARNESS_HPP

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "drgrad/harness.hpp"
#include "drgrad/verify.hpp"

namespace {

using namespace drgrad;

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) seeds.push_back(std::stoull(tok));
  return seeds;
}

int cmd_train(const std::string& config_path, const std::string& seeds,
              const std::string& out_dir, const std::string& optimizer,
              const std::string& skew) {
  RunConfig cfg = load_run_config(config_path);
  if (!seeds.empty()) cfg.seeds = parse_seed_list(seeds);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (!optimizer.empty()) cfg.optimizer.kind = opt_kind_from_string(optimizer);
  if (!skew.empty()) cfg.schedule.kind = skew_kind_from_string(skew);
  cfg.validate();

  Experiment exp = load_experiment(cfg);
  std::cout << "train: " << exp.train.size() << " examples, test: "
            << exp.test.size() << ", optimizer " << to_string(cfg.optimizer.kind)
            << ", " << cfg.seeds.size() << " seed(s)\n";
  SuiteResult result = run_suite(exp);
  for (const RunRecord& rec : result.records) {
    std::cout << "seed " << rec.seed << ": "
              << (rec.failed ? "FAILED at iteration " +
                                   std::to_string(rec.last_good_iteration)
                             : "final test_acc " +
                                   std::to_string(rec.rows.back().test_acc))
              << " (" << std::fixed << std::setprecision(1) << rec.wall_seconds
              << "s)\n";
  }
  std::cout << "wrote " << result.output_dir << "/mean_curve.csv\n";
  return result.partial ? 2 : 0;
}

int cmd_verify() {
  VerifyReport report = run_verification_suite();
  print_report(report, std::cout);
  return report.all_pass() ? 0 : 1;
}

int cmd_inspect_idx(const std::string& path) {
  IdxHeader hdr = read_idx_header(path);
  std::cout << path << ": magic 0x" << std::hex << std::setw(8)
            << std::setfill('0') << hdr.magic << std::dec << ", dims [";
  for (std::size_t i = 0; i < hdr.dims.size(); ++i)
    std::cout << (i ? ", " : "") << hdr.dims[i];
  std::cout << "]\n";
  return 0;
}

// Merges run CSVs into one wide table: t plus one test_acc column per run.
int cmd_export_curves(const std::string& out_path,
                      const std::vector<std::string>& inputs) {
  std::map<long, std::vector<double>> by_t;
  std::vector<std::string> names;
  for (std::size_t f = 0; f < inputs.size(); ++f) {
    std::ifstream in(inputs[f]);
    if (!in) throw IoError("cannot open " + inputs[f]);
    names.push_back(std::filesystem::path(inputs[f]).stem().string());
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      std::stringstream row(line);
      std::string cell;
      std::getline(row, cell, ',');
      const long t = std::stol(cell);
      std::getline(row, cell, ',');  // train_loss
      std::getline(row, cell, ',');  // test_acc
      auto& slot = by_t[t];
      slot.resize(inputs.size(),
                  std::numeric_limits<double>::quiet_NaN());
      slot[f] = std::stod(cell);
    }
  }
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot open " + out_path + " for writing");
  out << "t";
  for (const std::string& n : names) out << ',' << n;
  out << "\n";
  out.precision(17);
  for (const auto& [t, accs] : by_t) {
    out << t;
    for (double a : accs) out << ',' << a;
    out << "\n";
  }
  std::cout << "wrote " << out_path << " (" << by_t.size() << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"doubly robust / variance-reduced SGD experiment harness"};
  app.require_subcommand(1);

  std::string config_path, seeds, out_dir, optimizer, skew;
  auto* train = app.add_subcommand("train", "run a training suite from a config file");
  train->add_option("--config", config_path, "JSON run config")->required();
  train->add_option("--seeds", seeds, "comma-separated seed list override");
  train->add_option("--out", out_dir, "output directory override");
  train->add_option("--optimizer", optimizer, "optimizer kind override");
  train->add_option("--skew", skew, "skew schedule override {fixed,rotating,uniform}");

  auto* verify = app.add_subcommand(
      "verify", "run the brute-force estimator verification suite");

  std::string idx_path;
  auto* inspect = app.add_subcommand("inspect-idx", "print an IDX file header");
  inspect->add_option("path", idx_path, "IDX file")->required();

  std::string export_out;
  std::vector<std::string> export_inputs;
  auto* exportc = app.add_subcommand("export-curves",
                                     "merge run CSVs into one plot-ready CSV");
  exportc->add_option("--out", export_out, "output CSV path")->required();
  exportc->add_option("inputs", export_inputs, "run CSV files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(config_path, seeds, out_dir, optimizer, skew);
    if (*verify) return cmd_verify();
    if (*inspect) return cmd_inspect_idx(idx_path);
    if (*exportc) return cmd_export_curves(export_out, export_inputs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

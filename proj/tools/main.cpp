// Command-line driver: inference, method comparison, toy training,
// gradient auditing, exhaustive minimization, and filter export over the
// plain-text instance/parameter formats.

#include <CLI11.hpp>

#include "gridcrf/inference.hpp"
#include "gridcrf/io.hpp"
#include "gridcrf/learning.hpp"
#include "gridcrf/oracle.hpp"
#include "gridcrf/rng.hpp"
#include "gridcrf/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace gridcrf;

// Thrown when a requested check ran but did not pass (exit code 3).
struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RelaxedState dirichlet_restart(Rng& rng, int pixels, int labels) {
  RelaxedState state;
  state.q.resize(pixels, labels);
  for (int i = 0; i < pixels; ++i) {
    const std::vector<double> row = rng.dirichlet_row(labels);
    for (int l = 0; l < labels; ++l) state.q(i, l) = row[l];
  }
  return state;
}

DiscreteLabeling argmax_labels(const Matrix& q) {
  DiscreteLabeling labels(q.rows());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    int best = 0;
    for (int l = 1; l < q.cols(); ++l)
      if (q(i, l) > q(i, best)) best = l;
    labels[i] = best;
  }
  return labels;
}

struct InferOptions {
  std::string instance_path;
  std::string method = "pgd";
  int iterations = 5;
  double gamma = 0.5;
  double alpha = 0.0;
  bool safe_step = false;
  std::string out_labels;
  std::string out_trace;
};

void run_infer(const InferOptions& opt) {
  const InstanceFile file = read_instance(opt.instance_path);
  const CrfInstance inst = symmetrize_kernels(file.instance);

  bool renormalized = false;
  const RelaxedState q0 = init_q0(inst.unary.scores, &renormalized);
  if (renormalized)
    std::cerr << "warning: unary scores were renormalized to the simplex\n";

  InferenceTrace trace;
  DiscreteLabeling labels;
  if (opt.method == "pgd") {
    InferenceConfig config;
    config.iterations = opt.iterations;
    config.step_size = opt.gamma;
    config.leak = opt.alpha;
    config.safe_step = opt.safe_step;
    trace = run_pgd(inst, q0, config);
    RelaxedState final_state{trace.final_state(), trace.mode};
    if (final_state.mode != SimplexMode::kStrict)
      final_state = project_field(final_state.q, 0.0);
    labels = round_sequential(inst, final_state);
  } else if (opt.method == "mf") {
    trace = run_mean_field(inst, q0, opt.iterations);
    labels = argmax_labels(trace.final_state());
  } else {
    throw std::invalid_argument("unknown method '" + opt.method + "'");
  }

  for (const std::string& warning : trace.warnings)
    std::cerr << "warning: " << warning << "\n";
  write_label_map(opt.out_labels, inst.geometry, labels);
  write_trace_csv(opt.out_trace, trace);
  std::cout << "method " << trace.method << "\n"
            << "final_relaxed_energy " << format_double(trace.energies.back())
            << "\n"
            << "labeling_energy "
            << format_double(energy_discrete(inst, labels)) << "\n";
}

struct CompareOptions {
  std::string instance_path;
  int restarts = 10;
  int iterations = 10;
  double gamma = 0.5;
  bool safe_step = false;
  std::uint64_t seed = 0;
  std::string out;
};

void run_compare(const CompareOptions& opt) {
  const InstanceFile file = read_instance(opt.instance_path);
  const CrfInstance inst = symmetrize_kernels(file.instance);
  const int n = inst.geometry.pixels();

  InferenceConfig config;
  config.iterations = opt.iterations;
  config.step_size = opt.gamma;
  config.leak = 0.0;
  config.safe_step = opt.safe_step;

  std::ostringstream csv;
  csv << "restart,pgd_energy,mf_energy,pgd_kl,mf_kl\n";
  int pgd_wins = 0;
  for (int k = 0; k < opt.restarts; ++k) {
    Rng rng(opt.seed + static_cast<std::uint64_t>(k));
    const RelaxedState q0 = dirichlet_restart(rng, n, inst.labels);
    const InferenceTrace pgd = run_pgd(inst, q0, config);
    const InferenceTrace mf = run_mean_field(inst, q0, opt.iterations);
    if (pgd.energies.back() <= mf.energies.back()) ++pgd_wins;
    csv << k << "," << format_double(pgd.energies.back()) << ","
        << format_double(mf.energies.back()) << ","
        << format_double(pgd.kl.back()) << "," << format_double(mf.kl.back())
        << "\n";
  }
  std::ofstream out(opt.out, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(opt.out + ": cannot open for writing");
  out << csv.str();
  std::cout << "pgd_wins " << pgd_wins << "/" << opt.restarts << "\n";
}

struct TrainOptions {
  std::string dir;
  int epochs = 1;
  int batch = 1;
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-3;
  double alpha = 0.01;
  int iterations = 5;
  double gamma = 0.5;
  std::string out_params;
  std::string out_curve;
};

void run_train(const TrainOptions& opt) {
  std::vector<std::string> paths;
  for (const auto& entry : std::filesystem::directory_iterator(opt.dir))
    if (entry.path().extension() == ".gci") paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  if (paths.empty())
    throw std::invalid_argument(opt.dir + ": no .gci instances found");

  std::vector<TrainSample> samples;
  for (const std::string& path : paths) {
    InstanceFile file = read_instance(path);
    if (!file.truth)
      throw std::invalid_argument(path + ": training needs a TRUTH section");
    samples.push_back({std::move(file.instance), std::move(*file.truth)});
  }

  const CrfInstance& first = samples.front().instance;
  const ParameterSet start =
      init_params(first.labels, first.geometry.spatial_radius,
                  first.bilateral ? first.bilateral->radius : -1);

  TrainConfig config;
  config.learning_rate = opt.lr;
  config.momentum = opt.momentum;
  config.weight_decay = opt.weight_decay;
  config.batch_size = opt.batch;
  config.epochs = opt.epochs;
  config.leak = opt.alpha;
  config.inference.iterations = opt.iterations;
  config.inference.step_size = opt.gamma;

  const TrainResult result = train(samples, start, config);
  write_parameters(opt.out_params, result.params);
  if (!opt.out_curve.empty()) {
    std::ostringstream csv;
    csv << "step,loss\n";
    for (size_t i = 0; i < result.losses.size(); ++i)
      csv << i << "," << format_double(result.losses[i]) << "\n";
    std::ofstream out(opt.out_curve, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(opt.out_curve + ": cannot open for writing");
    out << csv.str();
  }
  std::cout << "initial_loss " << format_double(result.losses.front()) << "\n"
            << "final_loss " << format_double(result.losses.back()) << "\n";
}

struct GradcheckOptions {
  std::string instance_path;
  std::uint64_t seed = 0;
  int iterations = 5;
  double alpha = 0.01;
  double gamma = 0.5;
  double threshold = 1e-4;
};

void run_gradcheck(const GradcheckOptions& opt) {
  const InstanceFile file = read_instance(opt.instance_path);
  const CrfInstance inst = symmetrize_kernels(file.instance);

  DiscreteLabeling truth;
  if (file.truth) {
    truth = *file.truth;
  } else {
    Rng rng(opt.seed);
    truth.resize(inst.geometry.pixels());
    for (int& v : truth) v = rng.uniform_int(0, inst.labels - 1);
  }

  const GradCheckReport report =
      grad_check(inst, truth, opt.iterations, opt.alpha, opt.gamma);
  std::cout << report.summary() << "\n";
  if (!report.kink_free)
    throw CheckFailure("a projection input sat at a kink; rerun with another seed");
  if (report.max_error() >= opt.threshold)
    throw CheckFailure("max relative error " + format_double(report.max_error()) +
                       " exceeds " + format_double(opt.threshold));
}

void run_oracle(const std::string& instance_path, std::uint64_t max_configs) {
  const InstanceFile file = read_instance(instance_path);
  OracleBudget budget;
  if (max_configs > 0) budget.max_configurations = max_configs;
  const auto [labeling, energy] = exhaustive_min(file.instance, budget);
  std::cout << "E* = " << format_double(energy) << "\n";
  std::cout << "labeling";
  for (int v : labeling) std::cout << " " << v;
  std::cout << "\n";
}

struct SynthOptions {
  std::string generator = "potts-random";
  int height = 8;
  int width = 8;
  int labels = 2;
  int spatial_radius = 1;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

void run_synth(const SynthOptions& opt) {
  TaskSpec spec;
  spec.generator = opt.generator;
  spec.height = opt.height;
  spec.width = opt.width;
  spec.labels = opt.labels;
  spec.spatial_radius = opt.spatial_radius;
  spec.noise = opt.noise;
  spec.seed = opt.seed;
  const SynthResult result = generate(spec);
  write_instance(opt.out, result.instance,
                 result.truth ? &*result.truth : nullptr);
  std::cout << "wrote " << opt.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pairwise CRF inference and learning on pixel grids"};
  app.require_subcommand(1);

  InferOptions infer_opt;
  CLI::App* infer = app.add_subcommand("infer", "run inference on an instance");
  infer->add_option("instance", infer_opt.instance_path)->required();
  infer->add_option("--method", infer_opt.method)
      ->check(CLI::IsMember({"pgd", "mf"}));
  infer->add_option("--iters", infer_opt.iterations);
  infer->add_option("--gamma", infer_opt.gamma);
  infer->add_option("--alpha", infer_opt.alpha);
  infer->add_flag("--safe-step", infer_opt.safe_step);
  infer->add_option("--out-labels", infer_opt.out_labels)->required();
  infer->add_option("--out-trace", infer_opt.out_trace)->required();
  infer->callback([&] { run_infer(infer_opt); });

  CompareOptions compare_opt;
  CLI::App* compare =
      app.add_subcommand("compare", "paired gradient-descent vs mean-field runs");
  compare->add_option("instance", compare_opt.instance_path)->required();
  compare->add_option("--seeds", compare_opt.restarts);
  compare->add_option("--seed", compare_opt.seed);
  compare->add_option("--iters", compare_opt.iterations);
  compare->add_option("--gamma", compare_opt.gamma);
  compare->add_flag("--safe-step", compare_opt.safe_step);
  compare->add_option("--out", compare_opt.out)->required();
  compare->callback([&] { run_compare(compare_opt); });

  TrainOptions train_opt;
  CLI::App* train_cmd = app.add_subcommand("train", "toy end-to-end training");
  train_cmd->add_option("instance-dir", train_opt.dir)->required();
  train_cmd->add_option("--epochs", train_opt.epochs);
  train_cmd->add_option("--batch", train_opt.batch);
  train_cmd->add_option("--lr", train_opt.lr);
  train_cmd->add_option("--momentum", train_opt.momentum);
  train_cmd->add_option("--weight-decay", train_opt.weight_decay);
  train_cmd->add_option("--alpha", train_opt.alpha);
  train_cmd->add_option("--iters", train_opt.iterations);
  train_cmd->add_option("--gamma", train_opt.gamma);
  train_cmd->add_option("--out-params", train_opt.out_params)->required();
  train_cmd->add_option("--out-curve", train_opt.out_curve);
  train_cmd->callback([&] { run_train(train_opt); });

  GradcheckOptions gradcheck_opt;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "audit the backward pass numerically");
  gradcheck->add_option("instance", gradcheck_opt.instance_path)->required();
  gradcheck->add_option("--seed", gradcheck_opt.seed);
  gradcheck->add_option("--iters", gradcheck_opt.iterations);
  gradcheck->add_option("--alpha", gradcheck_opt.alpha);
  gradcheck->add_option("--gamma", gradcheck_opt.gamma);
  gradcheck->add_option("--threshold", gradcheck_opt.threshold);
  gradcheck->callback([&] { run_gradcheck(gradcheck_opt); });

  std::string oracle_path;
  std::uint64_t oracle_budget = 0;
  CLI::App* oracle = app.add_subcommand("oracle", "exhaustive discrete minimum");
  oracle->add_option("instance", oracle_path)->required();
  oracle->add_option("--max-configs", oracle_budget);
  oracle->callback([&] { run_oracle(oracle_path, oracle_budget); });

  std::string filters_params, filters_dir;
  CLI::App* filters =
      app.add_subcommand("export-filters", "write spatial filter heatmaps");
  filters->add_option("params", filters_params)->required();
  filters->add_option("dir", filters_dir)->required();
  filters->callback([&] {
    write_filter_heatmaps(read_parameters(filters_params).spatial, filters_dir);
    std::cout << "wrote heatmaps to " << filters_dir << "\n";
  });

  SynthOptions synth_opt;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic instance");
  synth->add_option("--generator", synth_opt.generator)
      ->check(CLI::IsMember({"potts-random", "stripes", "thin-vertical"}));
  synth->add_option("--height", synth_opt.height);
  synth->add_option("--width", synth_opt.width);
  synth->add_option("--labels", synth_opt.labels);
  synth->add_option("--spatial-radius", synth_opt.spatial_radius);
  synth->add_option("--noise", synth_opt.noise);
  synth->add_option("--seed", synth_opt.seed);
  synth->add_option("--out", synth_opt.out)->required();
  synth->callback([&] { run_synth(synth_opt); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const CheckFailure& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

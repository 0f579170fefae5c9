// coreset: command-line front end for the compression pipeline.
//
// Exit codes:
//   0  success
//   1  unexpected internal error
//   2  bad command-line arguments
//   3  unreadable, malformed or truncated file
//   4  input that fails validation (shapes, labels, non-finite values)
//   5  accuracy budget could not be met
//   6  solver did not converge

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "coreset/coreset_all.hpp"

namespace {

namespace fs = std::filesystem;
using namespace coreset;

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kFile = 3,
  kValidation = 4,
  kBudget = 5,
  kConvergence = 6,
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Format: return kFile;
    case ErrorKind::Shape:
    case ErrorKind::Validation: return kValidation;
    case ErrorKind::Budget: return kBudget;
    case ErrorKind::Convergence: return kConvergence;
  }
  return kInternal;
}

std::string manifest_format(const fs::path& path) {
  const auto j = nlohmann::json::parse(io::read_file(path), nullptr, false);
  require(!j.is_discarded() && j.is_object(), ErrorKind::Format, "malformed manifest '" + path.string() + "'");
  return j.value("format", "");
}

// Dense network or container, whichever the manifest holds.
Network load_any(const fs::path& path) {
  const auto format = manifest_format(path);
  if (format == kContainerFormat) return load_compressed(path).net;
  if (format == kNetworkFormat) return load_network(path);
  fail(ErrorKind::Format, "'" + path.string() + "' is neither a network nor a container manifest");
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      grid.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw CLI::ValidationError("--lambda-grid", "'" + item + "' is not a number");
    }
  }
  if (grid.empty()) throw CLI::ValidationError("--lambda-grid", "empty grid");
  return grid;
}

struct CompressArgs {
  std::string model, data, out, method = "s", lambda_grid;
  bool prune = false, single_lambda = false;
  double prune_budget = 0.005, coreset_budget = 0.005, subset_fraction = 1.0, quantize_slack = 0.005;
  unsigned quantize_bits = 32;
  std::uint64_t seed = 0;
};

int run_compress(const CompressArgs& a) {
  PipelineConfig cfg;
  cfg.method = parse_method(a.method);
  cfg.prune = a.prune;
  cfg.prune_budget = a.prune_budget;
  cfg.coreset_budget = a.coreset_budget;
  if (!a.lambda_grid.empty()) cfg.lambda_grid = parse_grid(a.lambda_grid);
  cfg.single_lambda = a.single_lambda;
  cfg.subset_fraction = a.subset_fraction;
  cfg.seed = a.seed;
  cfg.quantize_bits = a.quantize_bits;
  cfg.quantize_slack = a.quantize_slack;
  validate(cfg);

  const Network net = load_network(a.model);
  const EvalSet eval = load_evalset(a.data);
  StageTimings t;
  const CompressedContainer c = compress(net, cfg, eval, &t);
  save_compressed(c, a.out);
  save_report(c.report, report_path_for(a.out));
  std::cout << report_to_text(c.report);
  std::printf("wall clock: prune %.2fs, coreset %.2fs, quantize %.2fs\n", t.prune_seconds, t.coreset_seconds,
              t.quantize_seconds);
  std::cout << "wrote " << a.out << ", " << io::blob_path_for(a.out).string() << ", "
            << report_path_for(a.out).string() << "\n";
  return kOk;
}

int run_evaluate(const std::string& model, const std::string& data, double fraction, std::uint64_t seed) {
  const Network net = load_any(model);
  const EvalSet eval = load_evalset(data);
  std::printf("accuracy=%.17g\n", accuracy(net, eval, fraction, seed));
  return kOk;
}

int run_densify(const std::string& in, const std::string& out) {
  const CompressedContainer c = load_compressed(in);
  save_network(densify(c.net), out);
  std::cout << "wrote " << out << "\n";
  return kOk;
}

int run_report(const std::string& in) {
  const CompressedContainer c = load_compressed(in);
  std::cout << report_to_text(c.report) << "\n" << report_to_kv(c.report);
  return kOk;
}

int run_inspect(const std::string& model) {
  const Network net = load_any(model);
  const auto shapes = infer_shapes(net);
  std::size_t dense_total = 0, stored_total = 0;
  std::printf("input %s\n", shape_string(net.input_shape).c_str());
  for (const auto& l : net.layers) {
    std::printf("%-12s %-12s out %-14s", l.id.c_str(), std::string(to_string(l.kind)).c_str(),
                shape_string(shapes.at(l.id)).c_str());
    if (l.parametric()) {
      const auto& p = net.params.at(l.id);
      const std::size_t stored = param_count(p);
      std::printf(" W %zux%zu dense_params=%zu", l.filters, l.weight_cols(), l.dense_param_count());
      if (const auto* c = std::get_if<CoresetLayer>(&p))
        std::printf(" coreset rank=%zu params=%zu", c->rank(), stored);
      dense_total += l.dense_param_count();
      stored_total += stored;
    }
    std::printf("\n");
  }
  std::printf("total_dense_params=%zu\ntotal_stored_params=%zu\n", dense_total, stored_total);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coreset-based network compression without retraining"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  CompressArgs ca;
  auto* compress_cmd = app.add_subcommand("compress", "prune and coreset-compress a network");
  compress_cmd->add_option("--model", ca.model, "network manifest")->required();
  compress_cmd->add_option("--data", ca.data, "evaluation set manifest")->required();
  compress_cmd->add_option("--out", ca.out, "container manifest to write")->required();
  compress_cmd->add_option("--method", ca.method, "coreset method")->check(CLI::IsMember({"k", "s", "a", "K", "S", "A"}));
  compress_cmd->add_flag("--prune", ca.prune, "run activation-based pruning first");
  compress_cmd->add_option("--prune-budget", ca.prune_budget, "allowed accuracy drop for pruning")->check(CLI::Range(0.0, 1.0));
  compress_cmd->add_option("--coreset-budget", ca.coreset_budget, "allowed accuracy drop for coreset compression")
      ->check(CLI::Range(0.0, 1.0));
  compress_cmd->add_option("--lambda-grid", ca.lambda_grid, "comma-separated sparsity values (method s)");
  compress_cmd->add_flag("--single-lambda", ca.single_lambda, "use one lambda for all layers");
  compress_cmd->add_option("--subset-fraction", ca.subset_fraction, "fraction of samples used inside searches")
      ->check(CLI::Range(1e-9, 1.0));
  compress_cmd->add_option("--quantize-bits", ca.quantize_bits, "bits per weight (32 disables)")
      ->check(CLI::Range(1u, 8u) | CLI::IsMember({32u}));
  compress_cmd->add_option("--quantize-slack", ca.quantize_slack, "allowed accuracy drop for quantization")
      ->check(CLI::Range(0.0, 1.0));
  compress_cmd->add_option("--seed", ca.seed, "seed for subset sampling and quantization");

  std::string eval_model, eval_data;
  double eval_fraction = 1.0;
  std::uint64_t eval_seed = 0;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "top-1 accuracy of a network or container");
  evaluate_cmd->add_option("--model", eval_model, "network or container manifest")->required();
  evaluate_cmd->add_option("--data", eval_data, "evaluation set manifest")->required();
  evaluate_cmd->add_option("--subset-fraction", eval_fraction)->check(CLI::Range(1e-9, 1.0));
  evaluate_cmd->add_option("--seed", eval_seed);

  std::string densify_in, densify_out;
  auto* densify_cmd = app.add_subcommand("densify", "write a container back as a dense network");
  densify_cmd->add_option("--in", densify_in, "container manifest")->required();
  densify_cmd->add_option("--out", densify_out, "network manifest to write")->required();

  std::string report_in;
  auto* report_cmd = app.add_subcommand("report", "print a container's compression report");
  report_cmd->add_option("--in", report_in, "container manifest")->required();

  std::string inspect_model;
  auto* inspect_cmd = app.add_subcommand("inspect", "per-layer shapes and parameter counts");
  inspect_cmd->add_option("--model", inspect_model, "network or container manifest")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*compress_cmd) return run_compress(ca);
    if (*evaluate_cmd) return run_evaluate(eval_model, eval_data, eval_fraction, eval_seed);
    if (*densify_cmd) return run_densify(densify_in, densify_out);
    if (*report_cmd) return run_report(report_in);
    if (*inspect_cmd) return run_inspect(inspect_model);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}

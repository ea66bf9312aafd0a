#pragma once

#include <optional>
#include <string>

namespace crowdfuse::cli {

// Exit codes shared by all subcommands:
//   0 success, 1 runtime failure, 2 malformed input, 3 category or
//   parameter mismatch.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitSchema = 2;
inline constexpr int kExitMismatch = 3;

struct FuseOptions {
  std::string input_path;
  std::string output_path; // empty writes to stdout
  int threads = 1;
  std::optional<int> n_min, n_max, n_corr;
  std::optional<double> eta_cov, tau, beta, epsilon;
};

struct SimulateOptions {
  std::string scenario_path;
  std::string output_path; // empty writes to stdout
};

struct EvaluateOptions {
  std::string fused_path;
  std::string reference_path;
  double iou_threshold = 0.5;
  bool with_ap = false;
  std::string output_path; // empty writes to stdout
};

int cmd_fuse(const FuseOptions& opt);
int cmd_simulate(const SimulateOptions& opt);
int cmd_evaluate(const EvaluateOptions& opt);

// Full argv entry point: parses the subcommand, runs it and maps errors to
// the exit codes above.
int run(int argc, char** argv);

} // namespace crowdfuse::cli

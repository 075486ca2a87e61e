#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cabkgc {

// Everything a run needs, bound to command-line flags and the optional
// --config file. Flags override config-file values, which override these
// defaults.
struct RunConfig {
  std::string train_path;
  std::string valid_path;
  std::string test_path;

  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int ff_dim = 256;
  std::size_t max_len = 72;
  double dropout = 0.0;

  int batch_size = 16;
  double learning_rate = 5e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int max_epochs = 200;
  int patience = 3;
  int decimals = 3;
  std::size_t validation_subsample = 0;

  std::size_t hc_budget = 32;
  std::size_t rc_budget = 32;

  std::string protocol = "filtered";
  std::string tie_policy = "pessimistic";
  unsigned threads = 1;

  std::string out_dir = ".";
  std::uint64_t seed = 0;
};

// Run one CLI command (ingest, context, train, evaluate, predict,
// check-gradients). `args` excludes the program name. Returns the process
// exit code: 0 success, 1 usage/config error, 2 data error, 3 runtime error.
int cli_run(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace cabkgc

#include <iostream>
#include <string>
#include <vector>

#include "hympc/cli.hpp"
#include "acceptance_checks.hpp"

int main(int argc, char ** argv)
{
  std::vector<std::string> args(argv + 1, argv + argc);
  auto bench = [](const hympc::cli::BenchOptions & opts, std::ostream & out) {
    hympc::acceptance::Settings s;
    if (opts.model_path) { s.benchmark_path = *opts.model_path; }
    s.verbose = opts.verbose;
    return hympc::acceptance::run_all(s, out) ? 0 : 1;
  };
  return hympc::cli::run_cli(args, std::cout, std::cerr, bench);
}

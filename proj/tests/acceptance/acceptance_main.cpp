// Acceptance binary: one PASS/FAIL line per criterion; exit 1 on any failure.
#include "nglab/acceptance.hpp"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
  nglab::AcceptOptions opts;
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--quick") == 0) opts.quick = true;
    else if (std::strcmp(argv[i], "--serial") == 0) opts.parallel = false;
    else if (std::strncmp(argv[i], "--seed=", 7) == 0) opts.seed = std::strtoull(argv[i] + 7, nullptr, 10);
    else if (std::strcmp(argv[i], "--json") != 0) ids.push_back(std::atoi(argv[i]));
  }
  bool ok = true;
  bool json = false;
  for (int i = 1; i < argc; ++i) json = json || std::strcmp(argv[i], "--json") == 0;
  for (int id : ids.empty() ? std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11} : ids) {
    const nglab::CriterionResult r = nglab::run_criterion(id, opts);
    std::cout << nglab::format_line(r) << std::endl;
    if (json) std::cout << nglab::to_json(r).dump(1) << std::endl;
    ok = ok && r.pass;
  }
  return ok ? 0 : 1;
}

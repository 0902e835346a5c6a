// One PASS/FAIL line per acceptance criterion; non-zero exit if any fails.

#include <filesystem>
#include <iostream>

#include "avshap/selftest.hpp"

int main(int argc, char** argv) {
  avshap::selftest::Options opts;
  opts.scratch_dir = argc > 1 ? std::filesystem::path(argv[1])
                              : std::filesystem::temp_directory_path() / "avshap-acceptance";
  opts.info = &std::cout;
  int failed = 0;
  for (const auto& r : avshap::selftest::run_all(opts)) {
    std::cout << avshap::selftest::format_line(r) << std::endl;
    failed += r.passed ? 0 : 1;
  }
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criterion(s) failed"
                       : std::string("acceptance: all criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}

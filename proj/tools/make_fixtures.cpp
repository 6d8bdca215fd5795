// Regenerates the certified benchmark fixtures under tests/fixtures/: for
// each benchmark, one violating and one satisfying input found by uniform
// random sampling and certified by direct execution. Also prints the sampled
// violation rate, which must sit strictly inside (0, 0.2).
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "arfal/benchmarks.hpp"
#include "arfal/json_io.hpp"
#include "arfal/search.hpp"
#include "arfal/stl.hpp"

using namespace arfal;

int main(int argc, char** argv) {
  const std::filesystem::path out_dir = argc > 1 ? argv[1] : "tests/fixtures";
  std::filesystem::create_directories(out_dir);

  for (const auto& id : mut::benchmark_ids()) {
    const auto bench = mut::make_benchmark(id);
    const auto formula = stl::parse_stl(bench.requirement, bench.model->output_names());

    Rng rng(20260811);
    int violations = 0;
    const int samples = 1000;
    bool have_violating = false, have_satisfying = false;
    double best_violation = 1e300, best_margin = -1e300;
    io::json violating, satisfying;
    for (int i = 0; i < samples; ++i) {
      const auto candidate = search::generate(bench.profile, rng);
      const auto output = bench.model->execute(candidate.rendered);
      const double objective = stl::test_objective(*formula, candidate.rendered, output);
      if (objective <= 0.0) {
        ++violations;
        if (objective < best_violation) {
          best_violation = objective;
          violating = io::to_json(candidate);
          have_violating = true;
        }
      } else if (objective > best_margin) {
        best_margin = objective;
        satisfying = io::to_json(candidate);
        have_satisfying = true;
      }
    }
    const double rate = static_cast<double>(violations) / samples;
    std::printf("%-10s violation rate %.3f  best objective %.4f  best margin %.4f\n", id.c_str(), rate,
                have_violating ? best_violation : 0.0, have_satisfying ? best_margin : 0.0);
    if (!have_violating || !have_satisfying) {
      std::fprintf(stderr, "  !! %s: need both a violating and a satisfying input in %d samples\n", id.c_str(),
                   samples);
      continue;
    }
    std::ofstream(out_dir / (id + "_violating.json")) << violating.dump(2) << '\n';
    std::ofstream(out_dir / (id + "_satisfying.json")) << satisfying.dump(2) << '\n';
  }
  return 0;
}

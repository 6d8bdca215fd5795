#ifndef ARFAL_BENCHMARKS_HPP
#define ARFAL_BENCHMARKS_HPP

#include <memory>
#include <string>
#include <vector>

#include "arfal/model.hpp"
#include "arfal/signals.hpp"

namespace arfal::mut {

// A registered benchmark: the executable model plus the input profile,
// requirement and budgets it is normally driven with.
struct Benchmark {
  std::string id;
  std::shared_ptr<const ExecutableModel> model;
  signals::InputProfile profile;
  std::string requirement;  // STL text over the model's outputs
  int default_max = 100;     // falsification budget
  int default_max_ref = 10;  // refinement budget
};

// Desk-scale dynamical models with planted requirement violations:
//   heat2r    two-room switched heating; inputs pchip(4) and const(1), 24 s
//   autotrans throttle-driven hybrid with gear switching; pconst(7), 30 s
//   fuelctl   air-fuel controller; const(1) and pulse(10), 50 s
//   satlite   attitude dynamics with temperature disturbance; 4x pchip(16)
// `full_scale` switches satlite to the 24 h / 0.0312 s configuration.
Benchmark make_benchmark(const std::string& id, bool full_scale = false);

const std::vector<std::string>& benchmark_ids();

}  // namespace arfal::mut

#endif  // ARFAL_BENCHMARKS_HPP

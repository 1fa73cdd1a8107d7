#pragma once

// Finite-difference verification of every hand-written backward pass, used by
// the `gradcheck` command and the test suites.

#include <cstdint>
#include <string>
#include <vector>

namespace seqrec {

struct GradcheckOptions {
  std::size_t dim = 6;  // every layer width; at most 16
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  double tolerance = 1e-5;
  double eps = 1e-5;
  bool zero_init = false;
  /// Negative control: perturbs the analytic gradient of the named check.
  std::string corrupt;
};

struct GradcheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  bool passed = true;
};

/// Checks: joint_embed/addition, joint_embed/max, scene_embed, lstm/1..lstm/4, classifier,
/// and model/{addition,max}/{scene,noscene}/n{1,2,3}. The error per entry is the
/// maximum over seeds and coordinates of |a - n| / max(1, |a|).
GradcheckReport run_gradcheck(const GradcheckOptions& options);

std::vector<std::string> gradcheck_names();

}  // namespace seqrec

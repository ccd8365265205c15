// Exhaustive CTC alignment oracle: enumerates every frame labelling over the
// vocabulary, keeps those that collapse (merge repeats, drop blanks) to the
// target, and returns the best one. Exponential; tiny instances only.

#ifndef GRANALIGN_TESTS_ORACLES_CTC_BRUTEFORCE_H_
#define GRANALIGN_TESTS_ORACLES_CTC_BRUTEFORCE_H_

#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace oracle {

struct CtcBest {
  double score = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> labelling;                     // symbol per frame
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // per target symbol, inclusive frames
  int ties = 0;  // number of labellings sharing the best score
};

// logprobs: T x V row-major. target: symbol indices (no blanks).
inline std::optional<CtcBest> BruteForceCtc(const std::vector<double> &logprobs, std::size_t T,
                                            std::size_t V, std::size_t blank,
                                            const std::vector<std::size_t> &target) {
  std::vector<std::size_t> lab(T, 0);
  std::optional<CtcBest> best;
  while (true) {
    // Collapse and record which target position every frame belongs to.
    std::vector<std::size_t> collapsed;
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t prev = blank;
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t s = lab[t];
      if (s != blank) {
        if (s != prev || t == 0 || lab[t - 1] == blank) {
          collapsed.push_back(s);
          spans.emplace_back(t, t);
        } else {
          spans.back().second = t;
        }
      }
      prev = s;
    }
    if (collapsed == target) {
      double score = 0.0;
      for (std::size_t t = 0; t < T; ++t) score += logprobs[t * V + lab[t]];
      if (!best || score > best->score) {
        best = CtcBest{score, lab, spans, 1};
      } else if (score == best->score) {
        ++best->ties;
      }
    }
    // Next labelling (odometer).
    std::size_t k = 0;
    while (k < T && ++lab[k] == V) lab[k++] = 0;
    if (k == T) break;
  }
  return best;
}

}  // namespace oracle

#endif  // GRANALIGN_TESTS_ORACLES_CTC_BRUTEFORCE_H_

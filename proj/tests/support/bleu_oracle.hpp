#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <random>
#include <vector>

namespace oracle {

// Plain-loop cumulative BLEU: no maps, every count recomputed by scanning.
inline std::size_t occurrences(const std::vector<int>& seq, const std::vector<int>& seq_of_gram,
                               std::size_t at, std::size_t n) {
  std::size_t count = 0;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    bool same = true;
    for (std::size_t k = 0; k < n && same; ++k) same = seq[i + k] == seq_of_gram[at + k];
    count += same ? 1 : 0;
  }
  return count;
}

inline double bleu(const std::vector<int>& cand, const std::vector<std::vector<int>>& refs,
                   std::size_t max_n, double epsilon = 1e-9) {
  if (cand.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    double matched = 0.0, total = 0.0;
    for (std::size_t i = 0; i + n <= cand.size(); ++i) {
      total += 1.0;
      // Count each distinct n-gram once, at its first position.
      bool seen = false;
      for (std::size_t j = 0; j < i && !seen; ++j) {
        seen = std::equal(cand.begin() + static_cast<long>(j), cand.begin() + static_cast<long>(j + n),
                          cand.begin() + static_cast<long>(i));
      }
      if (seen) continue;
      const std::size_t in_cand = occurrences(cand, cand, i, n);
      std::size_t best_ref = 0;
      for (const auto& r : refs) best_ref = std::max(best_ref, occurrences(r, cand, i, n));
      matched += static_cast<double>(std::min(in_cand, best_ref));
    }
    log_sum += std::log((matched > 0 ? matched : epsilon) / std::max(total, 1.0));
  }
  std::size_t closest = refs.front().size();
  for (const auto& r : refs) {
    const auto d = [&](std::size_t len) { return std::abs(static_cast<long>(len) - static_cast<long>(cand.size())); };
    if (d(r.size()) < d(closest) || (d(r.size()) == d(closest) && r.size() < closest)) closest = r.size();
  }
  const double c = static_cast<double>(cand.size()), r = static_cast<double>(closest);
  const double brevity = c > r ? 1.0 : std::exp(1.0 - r / c);
  return brevity * std::exp(log_sum / static_cast<double>(max_n));
}

struct BleuInstance {
  std::vector<int> candidate;
  std::vector<std::vector<int>> references;
};

// Small alphabets so n-grams collide often.
inline BleuInstance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> alphabet(2, 5), len(1, 9), nrefs(1, 5);
  std::uniform_int_distribution<int> token(0, alphabet(rng) - 1);
  auto seq = [&] {
    std::vector<int> s(static_cast<std::size_t>(len(rng)));
    for (int& t : s) t = token(rng);
    return s;
  };
  BleuInstance out;
  out.candidate = seq();
  const int k = nrefs(rng);
  for (int i = 0; i < k; ++i) out.references.push_back(seq());
  return out;
}

}  // namespace oracle

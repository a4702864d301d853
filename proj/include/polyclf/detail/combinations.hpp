#pragma once

#include <numeric>
#include <type_traits>
#include <vector>

namespace polyclf::detail {

/// Calls fn(const std::vector<int>&) for every k-subset of {0..m-1} in
/// lexicographic order.  fn may return false to stop early.
template <class Fn>
void for_each_combination(int m, int k, Fn&& fn) {
  if (k < 0 || k > m) return;
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    if constexpr (std::is_same_v<decltype(fn(idx)), bool>) {
      if (!fn(idx)) return;
    } else {
      fn(idx);
    }
    int i = k - 1;
    while (i >= 0 && idx[i] == m - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

inline double binomial(int m, int k) {
  if (k < 0 || k > m) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (m - k + i) / i;
  return r;
}

}  // namespace polyclf::detail

#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <vector>

namespace t2t {

// Lowrance-Wagner dynamic program. Row and column 0 of `d` stand for index
// -1 and hold the sentinel a.size() + b.size().
template <class T>
std::size_t damerau_levenshtein(std::span<const T> a, std::span<const T> b) {
  const std::size_t la = a.size(), lb = b.size();
  const std::size_t inf = la + lb;
  const std::size_t w = lb + 2;
  std::vector<std::size_t> d((la + 2) * w, 0);
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * w + j]; };
  at(0, 0) = inf;
  for (std::size_t i = 0; i <= la; ++i) {
    at(i + 1, 0) = inf;
    at(i + 1, 1) = i;
  }
  for (std::size_t j = 0; j <= lb; ++j) {
    at(0, j + 1) = inf;
    at(1, j + 1) = j;
  }
  std::map<T, std::size_t> last_row;
  for (std::size_t i = 1; i <= la; ++i) {
    std::size_t last_col = 0;
    for (std::size_t j = 1; j <= lb; ++j) {
      auto it = last_row.find(b[j - 1]);
      const std::size_t k = it == last_row.end() ? 0 : it->second;
      const std::size_t l = last_col;
      std::size_t cost = 1;
      if (a[i - 1] == b[j - 1]) {
        cost = 0;
        last_col = j;
      }
      at(i + 1, j + 1) = std::min({at(i, j) + cost, at(i + 1, j) + 1, at(i, j + 1) + 1,
                                   at(k, l) + (i - k - 1) + 1 + (j - l - 1)});
    }
    last_row[a[i - 1]] = i;
  }
  return at(la + 1, lb + 1);
}

}  // namespace t2t

#include "dynvine/kendall.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace dynvine {

namespace {

// Sorts v by merge sort and returns the number of inversions (pairs i < j with
// v[i] > v[j]).
long long merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                      std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long long swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<long long>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return swaps;
}

// Number of tied pairs within runs of equal values in a sorted range.
template <class Eq>
long long tied_pairs(std::size_t n, Eq equal) {
  long long ties = 0, run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (equal(i - 1, i)) {
      ++run;
    } else {
      ties += run * (run - 1) / 2;
      run = 1;
    }
  }
  return ties + run * (run - 1) / 2;
}

}  // namespace

double empirical_kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("empirical_kendall_tau: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("empirical_kendall_tau: need at least two observations");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  const long long n0 = static_cast<long long>(n) * (static_cast<long long>(n) - 1) / 2;
  const long long tx = tied_pairs(n, [&](std::size_t a, std::size_t b) { return x[idx[a]] == x[idx[b]]; });
  const long long txy = tied_pairs(n, [&](std::size_t a, std::size_t b) {
    return x[idx[a]] == x[idx[b]] && y[idx[a]] == y[idx[b]];
  });
  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  const long long swaps = merge_count(ys, buf, 0, n);
  const long long ty = tied_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });
  const long long diff = n0 - tx - ty + txy - 2 * swaps;
  return static_cast<double>(diff) / static_cast<double>(n0);
}

}  // namespace dynvine

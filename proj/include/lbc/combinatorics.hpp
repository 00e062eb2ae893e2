#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lbc {

/// Fixed-size bitset over 64-bit blocks; big enough for C(16,8) = 12870 bits.
class Bitset {
 public:
  Bitset() = default;
  explicit Bitset(std::size_t n, bool value = false)
      : size_(n), blocks_((n + 63) / 64, value ? ~std::uint64_t{0} : 0) {
    trim();
  }

  std::size_t size() const { return size_; }

  bool test(std::size_t i) const {
    check(i);
    return (blocks_[i / 64] >> (i % 64)) & 1u;
  }

  void set(std::size_t i) {
    check(i);
    blocks_[i / 64] |= std::uint64_t{1} << (i % 64);
  }

  void reset(std::size_t i) {
    check(i);
    blocks_[i / 64] &= ~(std::uint64_t{1} << (i % 64));
  }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto b : blocks_) c += static_cast<std::size_t>(std::popcount(b));
    return c;
  }

  bool operator==(const Bitset& other) const {
    return size_ == other.size_ && blocks_ == other.blocks_;
  }

 private:
  void check(std::size_t i) const {
    if (i >= size_) throw std::out_of_range("bit index " + std::to_string(i) + " out of range");
  }
  void trim() {
    if (size_ % 64 != 0 && !blocks_.empty()) {
      blocks_.back() &= (std::uint64_t{1} << (size_ % 64)) - 1;
    }
  }

  std::size_t size_ = 0;
  std::vector<std::uint64_t> blocks_;
};

inline std::uint64_t binomial(int m, int n) {
  if (n < 0 || n > m) return 0;
  if (n > m - n) n = m - n;
  std::uint64_t r = 1;
  for (int k = 1; k <= n; ++k) {
    r = r * static_cast<std::uint64_t>(m - n + k) / static_cast<std::uint64_t>(k);
  }
  return r;
}

/// All C(m, n) ways of choosing n slots out of m, in lexicographic order, plus
/// the reverse index: for every slot, which combinations contain it. Shared by
/// all groups of all layers for a given pattern.
struct CombinationTable {
  int n = 0;
  int m = 0;
  std::vector<std::vector<int>> combos;     // lexicographic; each ascending
  std::vector<std::vector<int>> member_of;  // slot -> combo indices containing it

  std::size_t size() const { return combos.size(); }
};

inline CombinationTable enumerate_combinations(int n, int m) {
  if (n < 1 || n > m) {
    throw std::invalid_argument("invalid pattern " + std::to_string(n) + ":" + std::to_string(m));
  }
  if (m > 16) {
    throw std::invalid_argument("group width " + std::to_string(m) + " exceeds the supported cap of 16");
  }
  CombinationTable table;
  table.n = n;
  table.m = m;
  table.member_of.resize(static_cast<std::size_t>(m));

  std::vector<int> cur(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) cur[static_cast<std::size_t>(i)] = i;
  while (true) {
    const int idx = static_cast<int>(table.combos.size());
    for (int slot : cur) table.member_of[static_cast<std::size_t>(slot)].push_back(idx);
    table.combos.push_back(cur);
    // advance to the next combination in lexicographic order
    int i = n - 1;
    while (i >= 0 && cur[static_cast<std::size_t>(i)] == m - n + i) --i;
    if (i < 0) break;
    ++cur[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < n; ++j) cur[static_cast<std::size_t>(j)] = cur[static_cast<std::size_t>(j - 1)] + 1;
  }
  return table;
}

/// Number of alive combinations that contain the given slot.
inline std::size_t membership_sum(const CombinationTable& table, const Bitset& alive, int slot) {
  if (alive.size() != table.size()) {
    throw std::invalid_argument("alive bitset length " + std::to_string(alive.size()) +
                                " vs collection size " + std::to_string(table.size()));
  }
  if (slot < 0 || slot >= table.m) {
    throw std::out_of_range("slot " + std::to_string(slot) + " outside [0, " + std::to_string(table.m) + ")");
  }
  std::size_t total = 0;
  for (int ci : table.member_of[static_cast<std::size_t>(slot)]) {
    if (alive.test(static_cast<std::size_t>(ci))) ++total;
  }
  return total;
}

}  // namespace lbc

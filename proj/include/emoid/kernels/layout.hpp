#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace emoid::kernels {

// A ragged batch: sequence s occupies token rows [offsets[s], offsets[s+1])
// of every [tokens, channels] activation. Attention probabilities for
// sequence s, head h live at att_offsets[s] + h*L*L as an L x L block.
struct SeqLayout {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> att_offsets{0};
  std::size_t heads = 1;

  SeqLayout() = default;
  SeqLayout(std::span<const std::size_t> lengths, std::size_t n_heads) : heads(n_heads) {
    for (auto len : lengths) {
      offsets.push_back(offsets.back() + len);
      att_offsets.push_back(att_offsets.back() + n_heads * len * len);
    }
  }

  std::size_t sequences() const { return offsets.size() - 1; }
  std::size_t tokens() const { return offsets.back(); }
  std::size_t att_size() const { return att_offsets.back(); }
  std::size_t length(std::size_t s) const { return offsets[s + 1] - offsets[s]; }
};

inline void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace emoid::kernels

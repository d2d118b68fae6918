#pragma once

// Static k-d tree over a flat array of points for k-nearest queries.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <queue>
#include <span>
#include <utility>
#include <vector>

namespace nodnav::detail {

class KdTree {
 public:
  KdTree(std::span<const double> coords, std::size_t dim) : coords_(coords), dim_(dim) {
    const std::size_t n = coords.size() / dim;
    index_.resize(n);
    std::iota(index_.begin(), index_.end(), std::uint32_t{0});
    if (n) build(0, n);
  }

  /// Up to k nearest points to q as (squared distance, index), nearest first.
  std::vector<std::pair<double, std::uint32_t>> nearest(std::span<const double> q,
                                                        std::size_t k) const {
    std::priority_queue<std::pair<double, std::uint32_t>> heap;
    if (!nodes_.empty() && k > 0) search(0, q, k, heap);
    std::vector<std::pair<double, std::uint32_t>> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = heap.top();
      heap.pop();
    }
    return out;
  }

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;  // leaf range into index_
    std::int32_t left = -1, right = -1;
    std::uint32_t axis = 0;
    double split = 0.0;
  };
  static constexpr std::size_t kLeaf = 8;

  double at(std::uint32_t point, std::size_t axis) const { return coords_[point * dim_ + axis]; }

  std::int32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({static_cast<std::uint32_t>(begin), static_cast<std::uint32_t>(end)});
    if (end - begin <= kLeaf) return id;
    std::size_t axis = 0;
    double widest = -1.0;
    for (std::size_t a = 0; a < dim_; ++a) {
      double lo = at(index_[begin], a), hi = lo;
      for (std::size_t i = begin + 1; i < end; ++i) {
        lo = std::min(lo, at(index_[i], a));
        hi = std::max(hi, at(index_[i], a));
      }
      if (hi - lo > widest) {
        widest = hi - lo;
        axis = a;
      }
    }
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(index_.begin() + static_cast<std::ptrdiff_t>(begin),
                     index_.begin() + static_cast<std::ptrdiff_t>(mid),
                     index_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::uint32_t a, std::uint32_t b) { return at(a, axis) < at(b, axis); });
    const double split = at(index_[mid], axis);
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    Node& node = nodes_[static_cast<std::size_t>(id)];
    node.axis = static_cast<std::uint32_t>(axis);
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
  }

  void search(std::int32_t id, std::span<const double> q, std::size_t k,
              std::priority_queue<std::pair<double, std::uint32_t>>& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t p = index_[i];
        double d2 = 0.0;
        for (std::size_t a = 0; a < dim_; ++a) {
          const double diff = at(p, a) - q[a];
          d2 += diff * diff;
        }
        if (heap.size() < k) {
          heap.emplace(d2, p);
        } else if (d2 < heap.top().first) {
          heap.pop();
          heap.emplace(d2, p);
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::int32_t near = diff < 0.0 ? node.left : node.right;
    const std::int32_t far = diff < 0.0 ? node.right : node.left;
    search(near, q, k, heap);
    if (heap.size() < k || diff * diff < heap.top().first) search(far, q, k, heap);
  }

  std::span<const double> coords_;
  std::size_t dim_;
  std::vector<std::uint32_t> index_;
  std::vector<Node> nodes_;
};

}  // namespace nodnav::detail

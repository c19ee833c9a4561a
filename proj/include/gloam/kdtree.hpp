// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace gloam {

struct Neighbor {
  int index = -1;
  double sq_dist = 0.0;
};

// Exact k-d tree over fixed-dimension points. Nodes split the axis of
// widest spread at the median; leaves hold up to bucket_size points.
// Queries are exact and tie-stable: equal distances resolve to the
// smaller point index.
template <int Dim>
class KdTree {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  explicit KdTree(std::vector<Point> points, int bucket_size = 16)
      : points_(std::move(points)), bucket_size_(bucket_size) {
    if (points_.empty()) throw std::invalid_argument("KdTree: empty input");
    if (bucket_size_ < 1) throw std::invalid_argument("KdTree: bucket_size < 1");
    for (const Point& p : points_) {
      if (!p.allFinite()) throw std::invalid_argument("KdTree: non-finite point");
    }
    order_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    nodes_.reserve(2 * points_.size() / static_cast<std::size_t>(bucket_size_) + 8);
    root_ = build(0, static_cast<int>(points_.size()));
  }

  std::size_t size() const { return points_.size(); }
  const std::vector<Point>& points() const { return points_; }

  // k nearest neighbors, sorted by (squared distance, index) ascending.
  // k is clamped to the tree size.
  void knn(const Point& query, int k, std::vector<Neighbor>& out) const {
    if (k < 1) throw std::invalid_argument("KdTree::knn: k < 1");
    k = std::min<int>(k, static_cast<int>(points_.size()));
    out.clear();
    Search search{this, &query, &out, k};
    search.visit(root_);
    std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
      return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
    });
  }

  std::vector<Neighbor> knn(const Point& query, int k) const {
    std::vector<Neighbor> out;
    knn(query, k, out);
    return out;
  }

  Neighbor nearest(const Point& query) const {
    thread_local std::vector<Neighbor> scratch;
    knn(query, 1, scratch);
    return scratch.front();
  }

 private:
  struct Node {
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
    int begin = 0;
    int end = 0;
  };

  int build(int begin, int end) {
    const int node_index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    if (end - begin <= bucket_size_) {
      nodes_[node_index].begin = begin;
      nodes_[node_index].end = end;
      return node_index;
    }

    Point lo = points_[static_cast<std::size_t>(order_[begin])];
    Point hi = lo;
    for (int i = begin + 1; i < end; ++i) {
      const Point& p = points_[static_cast<std::size_t>(order_[i])];
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    int axis = 0;
    double spread = hi[0] - lo[0];
    for (int a = 1; a < Dim; ++a) {
      const double s = hi[a] - lo[a];
      if (s > spread) {
        spread = s;
        axis = a;
      }
    }

    const int mid = begin + (end - begin) / 2;
    std::nth_element(
        order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
        [&](int a, int b) {
          const double ca = points_[static_cast<std::size_t>(a)][axis];
          const double cb = points_[static_cast<std::size_t>(b)][axis];
          return ca < cb || (ca == cb && a < b);
        });

    nodes_[node_index].axis = axis;
    nodes_[node_index].split = points_[static_cast<std::size_t>(order_[mid])][axis];
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[node_index].left = left;
    nodes_[node_index].right = right;
    return node_index;
  }

  struct Search {
    const KdTree* tree;
    const Point* query;
    std::vector<Neighbor>* heap;  // max-heap on (sq_dist, index)
    int k;

    static bool heap_less(const Neighbor& a, const Neighbor& b) {
      return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
    }

    bool full() const { return static_cast<int>(heap->size()) >= k; }

    double worst() const {
      return full() ? heap->front().sq_dist
                    : std::numeric_limits<double>::infinity();
    }

    void offer(const Neighbor& cand) {
      if (!full()) {
        heap->push_back(cand);
        std::push_heap(heap->begin(), heap->end(), heap_less);
      } else if (heap_less(cand, heap->front())) {
        std::pop_heap(heap->begin(), heap->end(), heap_less);
        heap->back() = cand;
        std::push_heap(heap->begin(), heap->end(), heap_less);
      }
    }

    void visit(int node_index) {
      const Node& node = tree->nodes_[static_cast<std::size_t>(node_index)];
      if (node.axis < 0) {
        for (int i = node.begin; i < node.end; ++i) {
          const int idx = tree->order_[static_cast<std::size_t>(i)];
          const double sq =
              (tree->points_[static_cast<std::size_t>(idx)] - *query).squaredNorm();
          offer(Neighbor{idx, sq});
        }
        return;
      }
      const double delta = (*query)[node.axis] - node.split;
      const int near = delta < 0.0 ? node.left : node.right;
      const int far = delta < 0.0 ? node.right : node.left;
      visit(near);
      // <= keeps equal-distance candidates reachable so index ties resolve
      // correctly.
      if (!full() || delta * delta <= worst()) visit(far);
    }
  };

  std::vector<Point> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
  int bucket_size_ = 16;
};

}  // namespace gloam

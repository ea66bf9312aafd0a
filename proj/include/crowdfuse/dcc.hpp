#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "crowdfuse/errors.hpp"

namespace crowdfuse {

template <typename E>
struct DccCluster {
  std::vector<std::size_t> members; // indices into the input, ascending
  E head;
  double mean_dist = 0; // mean distance head -> member, for tie-breaks
};

template <typename E>
struct DccResult {
  std::size_t dominant = 0; // index into clusters
  std::vector<DccCluster<E>> clusters;
};

struct DccOptions {
  // Compactness comparison: strict (d < tau) by default; element counts
  // use d <= tau so that a zero radius still merges identical values.
  bool inclusive_tau = false;
};

// Agglomerates elements into compact clusters and names the dominant one.
//
// Each round the two clusters with the closest heads merge, provided the
// merge is legal: the merged cluster's recomputed head must be within tau
// of every member, the two old heads must themselves be within tau of each
// other, and no worker may hold two elements in one cluster. Ties prefer
// lower input indices. The dominant cluster is the largest; among equals
// the one with the tightest members, then the earliest input index.
//
//   dist(a, b)          distance between two element values
//   fuse(indices)       recomputed head over the given input indices
//   tau_of(head)        compactness radius, possibly a function of the head
//
// `workers` may be empty, in which case every element is considered to
// come from a distinct worker.
template <typename E, typename DistFn, typename FuseFn, typename TauFn>
DccResult<E> dcc(std::span<const E> elements, std::span<const int> workers,
                 DistFn&& dist, FuseFn&& fuse, TauFn&& tau_of,
                 DccOptions opt = {}) {
  const std::size_t n = elements.size();
  if (n == 0) throw Error(Errc::EmptyInput, "clustering over zero elements");
  if (!workers.empty() && workers.size() != n)
    throw Error(Errc::BadArgument, "worker list does not match element list");

  struct Node {
    std::vector<std::size_t> members;
    std::vector<int> owner_set; // sorted worker ids, empty when untracked
    E head;
    bool alive = true;
  };

  std::vector<Node> nodes;
  nodes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Node nd;
    nd.members = {i};
    if (!workers.empty()) nd.owner_set = {workers[i]};
    nd.head = elements[i];
    nodes.push_back(std::move(nd));
  }

  const auto within = [&](double d, double tau) {
    return opt.inclusive_tau ? d <= tau : d < tau;
  };

  const auto owners_clash = [](const std::vector<int>& a, const std::vector<int>& b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] < b[j]) ++i;
      else if (b[j] < a[i]) ++j;
      else return true;
    }
    return false;
  };

  while (true) {
    // All live pairs ordered by head distance, then input indices.
    struct Cand {
      double d;
      std::size_t lo, hi; // min/max first-member index, for ordering
      std::size_t i, j;   // node slots
    };
    std::vector<Cand> cands;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!nodes[i].alive) continue;
      for (std::size_t j = i + 1; j < nodes.size(); ++j) {
        if (!nodes[j].alive) continue;
        const double d = dist(nodes[i].head, nodes[j].head);
        const auto a = nodes[i].members.front();
        const auto b = nodes[j].members.front();
        cands.push_back({d, std::min(a, b), std::max(a, b), i, j});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      return std::tie(a.d, a.lo, a.hi) < std::tie(b.d, b.lo, b.hi);
    });

    bool merged = false;
    for (const Cand& c : cands) {
      Node& a = nodes[c.i];
      Node& b = nodes[c.j];
      if (!a.owner_set.empty() && owners_clash(a.owner_set, b.owner_set))
        continue;

      std::vector<std::size_t> members;
      members.reserve(a.members.size() + b.members.size());
      std::merge(a.members.begin(), a.members.end(), b.members.begin(),
                 b.members.end(), std::back_inserter(members));
      E head = fuse(std::span<const std::size_t>(members));
      const double tau = tau_of(head);
      if (!within(c.d, tau)) continue;
      bool compact = true;
      for (std::size_t m : members) {
        if (!within(dist(head, elements[m]), tau)) {
          compact = false;
          break;
        }
      }
      if (!compact) continue;

      a.members = std::move(members);
      if (!a.owner_set.empty()) {
        std::vector<int> owners;
        owners.reserve(a.owner_set.size() + b.owner_set.size());
        std::merge(a.owner_set.begin(), a.owner_set.end(), b.owner_set.begin(),
                   b.owner_set.end(), std::back_inserter(owners));
        a.owner_set = std::move(owners);
      }
      a.head = std::move(head);
      b.alive = false;
      merged = true;
      break;
    }
    if (!merged) break;
  }

  DccResult<E> out;
  for (auto& nd : nodes) {
    if (!nd.alive) continue;
    DccCluster<E> c;
    c.members = std::move(nd.members);
    double total = 0;
    for (std::size_t m : c.members) total += dist(nd.head, elements[m]);
    c.mean_dist = total / static_cast<double>(c.members.size());
    c.head = std::move(nd.head);
    out.clusters.push_back(std::move(c));
  }
  for (std::size_t k = 1; k < out.clusters.size(); ++k) {
    const auto& best = out.clusters[out.dominant];
    const auto& cur = out.clusters[k];
    const auto key = [](const DccCluster<E>& c) {
      return std::make_tuple(-static_cast<long long>(c.members.size()),
                             c.mean_dist, c.members.front());
    };
    if (key(cur) < key(best)) out.dominant = k;
  }
  return out;
}

// Convenience wrapper for a constant compactness radius.
template <typename E, typename DistFn, typename FuseFn>
DccResult<E> dcc_fixed_tau(std::span<const E> elements, std::span<const int> workers,
                           DistFn&& dist, FuseFn&& fuse, double tau,
                           DccOptions opt = {}) {
  return dcc(elements, workers, std::forward<DistFn>(dist),
             std::forward<FuseFn>(fuse), [tau](const E&) { return tau; }, opt);
}

} // namespace crowdfuse

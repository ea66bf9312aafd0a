#include "crowdfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "crowdfuse/geometry.hpp"

namespace crowdfuse {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dense worker index in order of first appearance.
int worker_slot(std::map<std::string, int>& index, std::vector<std::string>& ids,
                const std::string& worker_id) {
  auto [it, inserted] = index.try_emplace(worker_id, static_cast<int>(ids.size()));
  if (inserted) ids.push_back(worker_id);
  return it->second;
}

} // namespace

std::optional<std::pair<std::string, int>> fuse_classification(
    std::span<const LabelVote> votes, double beta) {
  if (votes.empty())
    throw Error(Errc::EmptyInput, "vote fusion over zero votes");
  std::map<std::string, int> counts;
  for (const auto& v : votes) ++counts[v.label];
  const std::string* best = nullptr;
  int best_count = 0;
  for (const auto& [label, count] : counts) {
    if (count > best_count) { // map order makes ties resolve to the smaller label
      best = &label;
      best_count = count;
    }
  }
  const double n = static_cast<double>(votes.size());
  if (static_cast<double>(best_count) >= beta * n - 1e-9)
    return std::make_pair(*best, best_count);
  return std::nullopt;
}

CountFusion fuse_counts(std::span<const CountVote> votes, double epsilon) {
  if (votes.empty())
    throw Error(Errc::EmptyInput, "count fusion over zero votes");
  std::vector<double> vals;
  std::vector<int> owners;
  std::map<std::string, int> index;
  std::vector<std::string> ids;
  vals.reserve(votes.size());
  for (const auto& v : votes) {
    vals.push_back(v.count);
    owners.push_back(worker_slot(index, ids, v.worker_id));
  }
  auto result = dcc<double>(
      vals, owners,
      [](double a, double b) { return std::fabs(a - b); },
      [&vals](std::span<const std::size_t> members) {
        double total = 0;
        for (std::size_t m : members) total += vals[m];
        return total / static_cast<double>(members.size());
      },
      // The radius scales with the candidate cluster's own mean.
      [epsilon](double head) { return std::floor(epsilon * head); },
      DccOptions{.inclusive_tau = true});

  CountFusion cf;
  const auto& dom = result.clusters[result.dominant];
  cf.fused = dom.head;
  for (std::size_t m : dom.members)
    cf.dominant_workers.push_back(votes[m].worker_id);
  cf.clusters = std::move(result);
  return cf;
}

std::vector<AssociationGroup> associate_elements(
    std::span<const int> owner,
    const std::function<double(std::size_t, std::size_t)>& similarity) {
  const std::size_t n = owner.size();
  std::vector<AssociationGroup> groups;
  if (n == 0) return groups;

  // Cross-pair similarity sums per set pair; average linkage is then
  // sum / (|A| * |B|), updated in O(sets) per merge.
  std::vector<double> sum(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      sum[i * n + j] = sum[j * n + i] = similarity(i, j);

  struct SetNode {
    std::vector<std::size_t> members;
    std::vector<int> owners;
    bool alive = true;
  };
  std::vector<SetNode> sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    sets[i].members = {i};
    sets[i].owners = {owner[i]};
  }

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
    double best_score = 0;
    std::size_t bi = n, bj = n, blo = n, bhi = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!sets[i].alive) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!sets[j].alive) continue;
        const double s = sum[i * n + j];
        if (s <= 0) continue;
        if (owners_clash(sets[i].owners, sets[j].owners)) continue;
        const double score =
            s / (static_cast<double>(sets[i].members.size()) *
                 static_cast<double>(sets[j].members.size()));
        const std::size_t lo = std::min(sets[i].members.front(), sets[j].members.front());
        const std::size_t hi = std::max(sets[i].members.front(), sets[j].members.front());
        if (score > best_score ||
            (score == best_score && std::tie(lo, hi) < std::tie(blo, bhi))) {
          best_score = score;
          bi = i;
          bj = j;
          blo = lo;
          bhi = hi;
        }
      }
    }
    if (bi == n) break;

    SetNode& a = sets[bi];
    SetNode& b = sets[bj];
    std::vector<std::size_t> members;
    std::merge(a.members.begin(), a.members.end(), b.members.begin(),
               b.members.end(), std::back_inserter(members));
    std::vector<int> owners;
    std::merge(a.owners.begin(), a.owners.end(), b.owners.begin(),
               b.owners.end(), std::back_inserter(owners));
    a.members = std::move(members);
    a.owners = std::move(owners);
    b.alive = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == bi || k == bj) continue;
      sum[bi * n + k] += sum[bj * n + k];
      sum[k * n + bi] = sum[bi * n + k];
    }
  }

  for (auto& s : sets)
    if (s.alive) groups.push_back({std::move(s.members)});
  std::sort(groups.begin(), groups.end(),
            [](const AssociationGroup& a, const AssociationGroup& b) {
              return a.members.front() < b.members.front();
            });
  return groups;
}

namespace {

// Shared pipeline for the three spatial categories: flatten elements and
// owners, split by class label, associate within each label, cluster each
// association group, and corroborate groups whose dominant cluster carries
// enough distinct workers.
template <typename Elem, typename Ops>
FusedResult fuse_spatial(std::span<const WorkerResult> results,
                         const FusionParams& params, const Ops& ops) {
  FusedResult out;
  std::vector<Elem> elems;
  std::vector<int> elem_worker;
  std::map<std::string, int> windex;
  std::vector<std::string> wids;

  for (const auto& r : results) {
    const int w = worker_slot(windex, wids, r.worker_id);
    out.per_worker_accept.try_emplace(r.worker_id, 0);
    for (const auto& e : r.elements) {
      const Elem* typed = std::get_if<Elem>(&e);
      if (!typed)
        throw Error(Errc::CategoryMismatch,
                    "result element does not belong to this job category");
      elems.push_back(*typed);
      elem_worker.push_back(w);
    }
  }

  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < elems.size(); ++i)
    by_label[ops.label_of(elems[i])].push_back(i);

  int corroborated = 0, uncorroborated = 0;
  for (const auto& [label, flat] : by_label) {
    std::vector<Elem> local;
    std::vector<int> owners;
    local.reserve(flat.size());
    for (std::size_t f : flat) {
      local.push_back(elems[f]);
      owners.push_back(elem_worker[f]);
    }
    auto groups = associate_elements(
        owners, [&](std::size_t i, std::size_t j) {
          return ops.similarity(local[i], local[j]);
        });
    for (const auto& g : groups) {
      std::vector<Elem> gel;
      std::vector<int> gworkers;
      gel.reserve(g.members.size());
      for (std::size_t m : g.members) {
        gel.push_back(local[m]);
        gworkers.push_back(owners[m]);
      }
      auto clustered = dcc<Elem>(
          gel, gworkers,
          [&](const Elem& a, const Elem& b) { return ops.distance(a, b); },
          [&](std::span<const std::size_t> members) {
            return ops.fuse(gel, members);
          },
          [&](const Elem&) { return params.tau; });
      const auto& dom = clustered.clusters[clustered.dominant];
      const int support = static_cast<int>(dom.members.size());
      if (support >= params.n_corr) {
        ++corroborated;
        out.corroborated.push_back({AnnotationElement(dom.head), support});
        for (std::size_t m : dom.members)
          ++out.per_worker_accept[wids[gworkers[m]]];
      } else {
        ++uncorroborated;
      }
    }
  }

  out.uncorroborated_groups = uncorroborated;
  const int total = corroborated + uncorroborated;
  out.coverage = total > 0 ? static_cast<double>(corroborated) / total : 1.0;
  return out;
}

struct DetectionOps {
  const std::string& label_of(const LabeledBox& e) const { return e.label; }
  double similarity(const LabeledBox& a, const LabeledBox& b) const {
    if (a.box.area() == 0 && b.box.area() == 0) return 0.0;
    return iou_box(a.box, b.box);
  }
  double distance(const LabeledBox& a, const LabeledBox& b) const {
    return corner_distance(a.box, b.box);
  }
  LabeledBox fuse(const std::vector<LabeledBox>& all,
                  std::span<const std::size_t> members) const {
    std::vector<BoundingBox> boxes;
    boxes.reserve(members.size());
    for (std::size_t m : members) boxes.push_back(all[m].box);
    return {box_average(boxes), all[members.front()].label};
  }
};

struct SegmentOps {
  int n_corr;

  const std::string& label_of(const Segment& e) const { return e.label; }
  double similarity(const Segment& a, const Segment& b) const {
    return iou_pixels(a, b);
  }
  double distance(const Segment& a, const Segment& b) const {
    const double s = iou_pixels(a, b);
    return s > 0 ? 1.0 / s : kInf;
  }
  Segment fuse(const std::vector<Segment>& all,
               std::span<const std::size_t> members) const {
    // A pixel makes the fused mask when enough members marked it; small
    // clusters fall back to requiring every member so the head is never
    // empty.
    const int need = std::min<int>(n_corr, static_cast<int>(members.size()));
    std::map<std::int64_t, int> marks;
    for (std::size_t m : members)
      for (std::int64_t c : all[m].cells) ++marks[c];
    std::vector<std::int64_t> cells;
    for (const auto& [cell, hits] : marks)
      if (hits >= need) cells.push_back(cell);
    const Segment& first = all[members.front()];
    if (cells.empty())
      // Disjoint members can leave no agreed pixels; keep the first
      // member's mask so the head stays a valid segment. Such clusters
      // never merge further (their pairwise IoU is 0 anyway).
      cells = first.cells;
    Segment s;
    s.width = first.width;
    s.height = first.height;
    s.label = first.label;
    s.cells = std::move(cells);
    return s;
  }
};

struct TrackOps {
  const std::string& label_of(const Track& e) const { return e.label; }
  double similarity(const Track& a, const Track& b) const {
    try {
      return iou_3d(a, b);
    } catch (const Error& e) {
      if (e.code() == Errc::DegeneratePair) return 0.0;
      throw;
    }
  }
  double distance(const Track& a, const Track& b) const {
    const double s = similarity(a, b);
    return s > 0 ? 1.0 / s : kInf;
  }
  Track fuse(const std::vector<Track>& all,
             std::span<const std::size_t> members) const {
    Track t;
    t.label = all[members.front()].label;
    std::map<int, std::vector<BoundingBox>> per_frame;
    for (std::size_t m : members)
      for (const auto& [frame, box] : all[m].frames)
        per_frame[frame].push_back(box);
    for (const auto& [frame, boxes] : per_frame)
      t.frames[frame] = box_average(boxes);
    return t;
  }
};

} // namespace

FusedResult fuse_detections(std::span<const WorkerResult> results,
                            const FusionParams& params) {
  return fuse_spatial<LabeledBox>(results, params, DetectionOps{});
}

FusedResult fuse_segments(std::span<const WorkerResult> results,
                          const FusionParams& params) {
  return fuse_spatial<Segment>(results, params, SegmentOps{params.n_corr});
}

FusedResult fuse_tracks(std::span<const WorkerResult> results,
                        const FusionParams& params) {
  return fuse_spatial<Track>(results, params, TrackOps{});
}

namespace {

// IoU restricted to frames inside [w0, w1]; 0 when neither track covers
// the window.
double windowed_iou(const Track& a, const Track& b, int w0, int w1) {
  double inter = 0, uni = 0;
  for (int f = w0; f <= w1; ++f) {
    auto ia = a.frames.find(f);
    auto ib = b.frames.find(f);
    if (ia == a.frames.end() && ib == b.frames.end()) continue;
    if (ia == a.frames.end()) {
      uni += ib->second.area();
    } else if (ib == b.frames.end()) {
      uni += ia->second.area();
    } else {
      const double w = std::min(ia->second.x_br, ib->second.x_br) -
                       std::max(ia->second.x_tl, ib->second.x_tl);
      const double h = std::min(ia->second.y_br, ib->second.y_br) -
                       std::max(ia->second.y_tl, ib->second.y_tl);
      const double x = (w > 0 && h > 0) ? w * h : 0.0;
      inter += x;
      uni += ia->second.area() + ib->second.area() - x;
    }
  }
  return uni > 0 ? inter / uni : 0.0;
}

} // namespace

std::vector<Track> stitch_chunks(std::span<const ChunkTracks> chunks,
                                 int overlap_frames) {
  if (overlap_frames < 1)
    throw Error(Errc::BadArgument, "overlap must span at least one frame");
  std::vector<Track> globals;
  if (chunks.empty()) return globals;

  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (chunks[i].frame_begin > chunks[i].frame_end)
      throw Error(Errc::BadArgument, "chunk frame range is inverted");
    if (i > 0) {
      const int shared = chunks[i - 1].frame_end - chunks[i].frame_begin + 1;
      if (shared != overlap_frames)
        throw Error(Errc::OverlapMismatch,
                    "chunks " + std::to_string(i - 1) + " and " + std::to_string(i) +
                        " share " + std::to_string(shared) + " frames, expected " +
                        std::to_string(overlap_frames));
    }
  }

  std::vector<long> owner; // previous chunk's track -> global index
  for (const auto& t : chunks[0].tracks) {
    owner.push_back(static_cast<long>(globals.size()));
    globals.push_back(t);
  }

  for (std::size_t ci = 1; ci < chunks.size(); ++ci) {
    const auto& prev = chunks[ci - 1];
    const auto& cur = chunks[ci];
    const int w0 = cur.frame_begin;
    const int w1 = prev.frame_end;

    struct Cand {
      double iou;
      std::size_t p, q;
    };
    std::vector<Cand> cands;
    for (std::size_t p = 0; p < prev.tracks.size(); ++p) {
      for (std::size_t q = 0; q < cur.tracks.size(); ++q) {
        if (prev.tracks[p].label != cur.tracks[q].label) continue;
        const double iou = windowed_iou(prev.tracks[p], cur.tracks[q], w0, w1);
        if (iou >= 0.3) cands.push_back({iou, p, q});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      return std::tie(b.iou, a.p, a.q) < std::tie(a.iou, b.p, b.q);
    });

    std::vector<long> next_owner(cur.tracks.size(), -1);
    std::vector<bool> used_p(prev.tracks.size(), false);
    for (const auto& c : cands) {
      if (used_p[c.p] || next_owner[c.q] >= 0) continue;
      used_p[c.p] = true;
      const long g = owner[c.p];
      next_owner[c.q] = g;
      // Earlier chunk's boxes stand inside the shared window.
      for (const auto& [frame, box] : cur.tracks[c.q].frames)
        if (frame > w1) globals[g].frames[frame] = box;
    }
    for (std::size_t q = 0; q < cur.tracks.size(); ++q) {
      if (next_owner[q] >= 0) continue;
      next_owner[q] = static_cast<long>(globals.size());
      globals.push_back(cur.tracks[q]);
    }
    owner = std::move(next_owner);
  }
  return globals;
}

} // namespace crowdfuse

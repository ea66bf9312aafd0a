#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crowdfuse/dcc.hpp"
#include "crowdfuse/types.hpp"

namespace crowdfuse {

struct LabelVote {
  std::string label;
  std::string worker_id;
};

struct CountVote {
  double count = 0;
  std::string worker_id;
};

// Super-majority vote: the winning label and its vote count when some
// label holds at least a beta fraction of all votes; nullopt otherwise.
// With beta > 0.5 at most one label can qualify.
std::optional<std::pair<std::string, int>> fuse_classification(
    std::span<const LabelVote> votes, double beta);

struct CountFusion {
  double fused = 0;                      // dominant cluster head (mean)
  DccResult<double> clusters;            // full clustering, dominant marked
  std::vector<std::string> dominant_workers;
};

// Clusters scalar counts with radius floor(epsilon * candidate mean),
// inclusive comparison so identical values merge even at radius zero.
CountFusion fuse_counts(std::span<const CountVote> votes, double epsilon);

struct AssociationGroup {
  std::vector<std::size_t> members; // global element indices, ascending
};

// Greedy average-linkage grouping of elements that refer to the same
// real-world object. Starts from singletons and repeatedly merges the two
// groups with the highest mean cross-pair similarity; a merge is legal
// only if the union keeps at most one element per owner and the mean
// similarity is strictly positive. Ties prefer lower element indices.
std::vector<AssociationGroup> associate_elements(
    std::span<const int> owner,
    const std::function<double(std::size_t, std::size_t)>& similarity);

// The three spatial fusers share one pipeline: split elements by class
// label, associate within the label, cluster each group, then corroborate
// groups whose dominant cluster has at least n_corr distinct workers.
FusedResult fuse_detections(std::span<const WorkerResult> results,
                            const FusionParams& params);
FusedResult fuse_segments(std::span<const WorkerResult> results,
                          const FusionParams& params);
FusedResult fuse_tracks(std::span<const WorkerResult> results,
                        const FusionParams& params);

// One video chunk's consensus tracks, frames [frame_begin, frame_end].
struct ChunkTracks {
  int frame_begin = 0;
  int frame_end = 0;
  std::vector<Track> tracks;
};

// Joins per-chunk tracks into whole-video tracks. Consecutive chunks must
// share exactly overlap_frames frames; same-label tracks pair greedily by
// overlap-window IoU and link when it reaches 0.3. The earlier chunk's
// boxes win inside the shared window.
std::vector<Track> stitch_chunks(std::span<const ChunkTracks> chunks,
                                 int overlap_frames);

} // namespace crowdfuse

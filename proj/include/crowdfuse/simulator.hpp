#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crowdfuse/hit_manager.hpp"
#include "crowdfuse/rng.hpp"
#include "crowdfuse/types.hpp"

namespace crowdfuse {

enum class WorkerKind { Perfect, Jittered, Lazy, Spammer, Overcounter };

const char* to_string(WorkerKind k);
std::optional<WorkerKind> worker_kind_from_string(std::string_view s);

struct WorkerModel {
  WorkerKind kind = WorkerKind::Perfect;
  double sigma = 0;      // geometry noise, pixels (Jittered)
  double label_flip = 0; // probability of answering a wrong label (Jittered)
  double p_miss = 0;     // probability of skipping an object (Lazy)
  double count_bias = 0; // relative overcount (Overcounter)
  // Log-normal work time in seconds; the median is exp(speed_mu).
  double speed_mu = 3.8066624897703196; // log(45)
  double speed_sigma = 0.3;
};

struct PopulationSlice {
  WorkerModel model;
  double fraction = 0;
};

struct VideoConfig {
  int num_videos = 0;
  int chunks_per_video = 2;
  int chunk_frames = 30;
  int overlap_frames = 5;
};

struct Scenario {
  std::uint64_t seed = 0;
  int num_tasks = 0; // ignored for tracking, where video dictates the count
  int image_width = 1280;
  int image_height = 720;
  int objects_min = 1;
  int objects_max = 10;
  double count_min = 0;
  double count_max = 50;
  bool crowding = false; // allow planted objects to overlap heavily
  int worker_count = 0;
  double take_probability = 0.5;
  std::vector<PopulationSlice> population;
  bool filtering = true;
  AdmissionPolicy admission;
  std::optional<VideoConfig> video;
  long max_steps = 2'000'000;
  JobSpec job;
};

// What the annotators are asked about; regenerable from (scenario, index).
struct SceneTruth {
  std::vector<AnnotationElement> elements;
  int frame_begin = 0; // tracking chunks only
  int frame_end = 0;
};

int scenario_task_count(const Scenario& s);
std::string scenario_task_id(const Scenario& s, int task_index);

// Deterministic in (scenario.seed, task_index); chunks of one video share
// the same planted objects.
SceneTruth generate_scene(const Scenario& s, int task_index);

// One worker's answer to one task, drawn from the worker's own stream.
WorkerResult worker_respond(const WorkerModel& model, const std::string& task_id,
                            const SceneTruth& truth, const Scenario& s, Rng& rng);

struct TaskReport {
  std::string task_id;
  std::string media;
  TaskStatus status = TaskStatus::Open;
  int results = 0;
  int first_fusion_at = 0;       // result count at the first fusion attempt
  int max_parallel_relaunch = 0; // in-flight requests past the first fusion
  std::vector<AnnotationElement> planted;
  std::optional<FusedResult> fused;
  std::optional<double> fused_count;
};

struct WorkerReport {
  std::string worker_id;
  WorkerKind kind = WorkerKind::Perfect;
  int results = 0;
  int approved = 0;
  int rejected = 0;
  int hits_paid = 0;
  int hits_rejected = 0;
};

struct VideoReport {
  int video = 0;
  int planted_tracks = 0;
  std::vector<Track> stitched;
};

struct SimulationReport {
  std::string job_id;
  Category category = Category::ImageClassification;
  std::uint64_t seed = 0;
  bool all_tasks_done = false;
  bool budget_exhausted = false;
  double sim_time_end = 0;
  long events = 0;
  int total_results = 0;
  int hits_listed = 0;
  int hits_paid = 0;
  int hits_rejected = 0;
  int hits_disposed = 0;
  double paid_out = 0;
  int results_approved = 0;
  int results_rejected = 0;
  std::vector<double> price_trace; // per-task price after each approved result
  std::map<int, int> results_histogram;
  std::vector<TaskReport> tasks;
  std::vector<WorkerReport> workers;
  std::vector<VideoReport> videos; // tracking only

  double approval_rate() const {
    const int total = results_approved + results_rejected;
    return total ? static_cast<double>(results_approved) / total : 0.0;
  }
};

// Runs the whole closed loop: listing, admission, task selection, response
// synthesis, consensus, settlement, pricing and purging, as a
// single-threaded discrete-event simulation. The report is a pure function
// of (scenario, job).
SimulationReport run_job(const Scenario& scenario, const JobSpec& job);

inline SimulationReport run_job(const Scenario& scenario) {
  return run_job(scenario, scenario.job);
}

} // namespace crowdfuse

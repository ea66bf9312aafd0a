#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "crowdfuse/errors.hpp"

namespace crowdfuse {

enum class Category {
  ImageClassification,
  VideoClassification,
  Counting,
  Detection,
  Segmentation,
  Tracking,
};

const char* to_string(Category c);
std::optional<Category> category_from_string(std::string_view s);
bool is_classification(Category c);
// Detection, Segmentation and Tracking share the associate/cluster pipeline.
bool is_spatial(Category c);

struct FusionParams {
  int n_min = 1;
  int n_max = 20;
  int n_corr = 3;
  double eta_cov = 0.9;
  double tau = 0.0;
  double beta = 0.7;
  double epsilon = 0.1;
};

FusionParams default_params(Category c);

// Axis-aligned, top-left origin. Degenerate (zero-area) boxes are legal
// values; ratio operations reject pairs where both sides are degenerate.
struct BoundingBox {
  double x_tl = 0;
  double y_tl = 0;
  double x_br = 0;
  double y_br = 0;

  double width() const { return x_br - x_tl; }
  double height() const { return y_br - y_tl; }
  double area() const { return width() * height(); }
};

struct LabeledBox {
  BoundingBox box;
  std::string label;
};

// Pixel mask on a raster grid. Cells are y*width+x, sorted and unique.
struct Segment {
  int width = 0;
  int height = 0;
  std::string label;
  std::vector<std::int64_t> cells;

  static Segment make(int width, int height, std::string label,
                      std::vector<std::int64_t> cells);
};

struct Track {
  std::string label;
  std::map<int, BoundingBox> frames; // frame number -> box
};

struct ClassLabel {
  std::string value;
};

struct Count {
  double value = 0;
};

using AnnotationElement = std::variant<ClassLabel, Count, LabeledBox, Segment, Track>;

// True when the element variant is one the given category accepts.
bool element_matches_category(const AnnotationElement& e, Category c);

struct WorkerResult {
  std::string task_id;
  std::string worker_id;
  std::vector<AnnotationElement> elements;
  double duration = 0;    // seconds spent, > 0
  double submit_time = 0; // simulation clock
};

enum class TaskStatus { Open, Aggregated, Purged };

const char* to_string(TaskStatus s);

// One consensus group that cleared the corroboration bar: the fused head
// plus the number of distinct workers backing it.
struct CorroboratedElement {
  AnnotationElement element;
  int support = 0;
};

struct FusedResult {
  std::vector<CorroboratedElement> corroborated;
  int uncorroborated_groups = 0;
  double coverage = 1.0; // corroborated / (corroborated + uncorroborated)
  // Per submitting worker: membership count in dominant clusters of
  // corroborated groups. Zero entries are kept so every worker appears.
  std::map<std::string, int> per_worker_accept;
};

struct TaskState {
  std::string task_id;
  std::string job_id;
  std::string media; // source image / video chunk reference
  std::vector<WorkerResult> results;
  std::set<std::string> served_workers;
  TaskStatus status = TaskStatus::Open;
  std::optional<FusedResult> fused;
};

enum class HitStatus { Listed, Submitted, Paid, Rejected, Disposed };

const char* to_string(HitStatus s);

struct HitRecord {
  std::string hit_id;
  std::string job_id;
  double price = 0; // total listed reward, > 0
  std::vector<std::string> task_ids;
  std::optional<std::string> worker_id; // set once accepted
  HitStatus status = HitStatus::Listed;
};

struct WorkerProfile {
  std::string worker_id;
  // job_id -> (approved results, rejected results)
  std::map<std::string, std::pair<int, int>> tallies;

  // Empty history means the worker is unknown for that job.
  std::optional<double> approval_rate(const std::string& job_id) const;
};

struct PricingState {
  std::string job_id;
  double target_hourly_rate = 0;
  std::vector<double> approved_durations; // unordered multiset
  double current_price = 0;               // per task
};

struct JobSpec {
  std::string job_id;
  Category category = Category::ImageClassification;
  std::vector<std::string> class_labels;
  FusionParams params;
  double target_hourly_rate = 8.0;
  double initial_hit_price = 0.05; // per task
  int batch_size = 1;
  double payment_threshold = 0.5;
  std::vector<std::string> task_sources;
};

// Returns one message per violated invariant; empty means the job is
// usable as-is. Messages start with a stable code word.
std::vector<std::string> validate_job(const JobSpec& job);

} // namespace crowdfuse

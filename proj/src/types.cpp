#include "crowdfuse/types.hpp"

#include <algorithm>
#include <cmath>

namespace crowdfuse {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::DegeneratePair: return "DegeneratePair";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::EmptyTracks: return "EmptyTracks";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::CategoryMismatch: return "CategoryMismatch";
    case Errc::AlreadyAggregated: return "AlreadyAggregated";
    case Errc::NotAggregated: return "NotAggregated";
    case Errc::NotSubmitted: return "NotSubmitted";
    case Errc::NoEligibleTasks: return "NoEligibleTasks";
    case Errc::OverlapMismatch: return "OverlapMismatch";
    case Errc::SchemaError: return "SchemaError";
    case Errc::BadArgument: return "BadArgument";
  }
  return "UnknownError";
}

const char* to_string(Category c) {
  switch (c) {
    case Category::ImageClassification: return "image_classification";
    case Category::VideoClassification: return "video_classification";
    case Category::Counting: return "counting";
    case Category::Detection: return "detection";
    case Category::Segmentation: return "segmentation";
    case Category::Tracking: return "tracking";
  }
  return "unknown";
}

std::optional<Category> category_from_string(std::string_view s) {
  if (s == "image_classification") return Category::ImageClassification;
  if (s == "video_classification") return Category::VideoClassification;
  if (s == "counting") return Category::Counting;
  if (s == "detection") return Category::Detection;
  if (s == "segmentation") return Category::Segmentation;
  if (s == "tracking") return Category::Tracking;
  return std::nullopt;
}

bool is_classification(Category c) {
  return c == Category::ImageClassification || c == Category::VideoClassification;
}

bool is_spatial(Category c) {
  return c == Category::Detection || c == Category::Segmentation ||
         c == Category::Tracking;
}

FusionParams default_params(Category c) {
  FusionParams p;
  switch (c) {
    case Category::ImageClassification:
    case Category::VideoClassification:
      p.n_min = 3;
      p.n_max = 20;
      p.beta = 0.7;
      break;
    case Category::Counting:
      p.n_min = 10;
      p.n_max = 20;
      p.epsilon = 0.1;
      break;
    case Category::Detection:
      p.n_min = 5;
      p.n_max = 20;
      p.n_corr = 3;
      p.tau = 15.0;
      p.eta_cov = 0.9;
      break;
    case Category::Segmentation:
      p.n_min = 10;
      p.n_max = 20;
      p.n_corr = 3;
      p.tau = 1.0 / 0.3;
      p.eta_cov = 0.9;
      break;
    case Category::Tracking:
      p.n_min = 5;
      p.n_max = 20;
      p.n_corr = 3;
      p.tau = 1.0 / 0.3;
      p.eta_cov = 0.9;
      break;
  }
  return p;
}

const char* to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::Open: return "open";
    case TaskStatus::Aggregated: return "aggregated";
    case TaskStatus::Purged: return "purged";
  }
  return "unknown";
}

const char* to_string(HitStatus s) {
  switch (s) {
    case HitStatus::Listed: return "listed";
    case HitStatus::Submitted: return "submitted";
    case HitStatus::Paid: return "paid";
    case HitStatus::Rejected: return "rejected";
    case HitStatus::Disposed: return "disposed";
  }
  return "unknown";
}

Segment Segment::make(int width, int height, std::string label,
                      std::vector<std::int64_t> cells) {
  if (width <= 0 || height <= 0)
    throw Error(Errc::BadArgument, "segment grid must be positive");
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  if (cells.empty())
    throw Error(Errc::EmptyInput, "segment has no pixels");
  const std::int64_t limit = static_cast<std::int64_t>(width) * height;
  if (cells.front() < 0 || cells.back() >= limit)
    throw Error(Errc::BadArgument, "segment pixel outside its grid");
  Segment s;
  s.width = width;
  s.height = height;
  s.label = std::move(label);
  s.cells = std::move(cells);
  return s;
}

bool element_matches_category(const AnnotationElement& e, Category c) {
  switch (c) {
    case Category::ImageClassification:
    case Category::VideoClassification:
      return std::holds_alternative<ClassLabel>(e);
    case Category::Counting:
      return std::holds_alternative<Count>(e);
    case Category::Detection:
      return std::holds_alternative<LabeledBox>(e);
    case Category::Segmentation:
      return std::holds_alternative<Segment>(e);
    case Category::Tracking:
      return std::holds_alternative<Track>(e);
  }
  return false;
}

std::optional<double> WorkerProfile::approval_rate(const std::string& job_id) const {
  auto it = tallies.find(job_id);
  if (it == tallies.end()) return std::nullopt;
  const auto [approved, rejected] = it->second;
  const int total = approved + rejected;
  if (total == 0) return std::nullopt;
  return static_cast<double>(approved) / total;
}

std::vector<std::string> validate_job(const JobSpec& job) {
  std::vector<std::string> issues;
  const bool needs_labels = is_classification(job.category) || is_spatial(job.category);
  if (needs_labels && job.class_labels.empty())
    issues.push_back("EmptyLabelSet: category requires at least one class label");
  if (!needs_labels && !job.class_labels.empty())
    issues.push_back("UnexpectedLabelSet: counting jobs take no class labels");
  if (job.target_hourly_rate <= 0)
    issues.push_back("NonPositiveRate: target_hourly_rate must be > 0");
  if (job.initial_hit_price <= 0)
    issues.push_back("NonPositivePrice: initial_hit_price must be > 0");
  if (job.batch_size < 1)
    issues.push_back("BadBatch: batch_size must be >= 1");
  if (!(job.payment_threshold >= 0.0 && job.payment_threshold <= 1.0))
    issues.push_back("BadThreshold: payment_threshold must lie in [0,1]");
  const FusionParams& p = job.params;
  if (p.n_min < 1)
    issues.push_back("BadParams: n_min must be >= 1");
  if (p.n_max < p.n_min)
    issues.push_back("BadParams: n_max must be >= n_min");
  if (p.n_corr < 1)
    issues.push_back("BadParams: n_corr must be >= 1");
  if (!(p.eta_cov >= 0.0 && p.eta_cov <= 1.0))
    issues.push_back("BadThreshold: eta_cov must lie in [0,1]");
  if (p.tau < 0 || !std::isfinite(p.tau))
    issues.push_back("BadParams: tau must be finite and >= 0");
  if (!(p.beta > 0.0 && p.beta <= 1.0))
    issues.push_back("BadParams: beta must lie in (0,1]");
  if (!(p.epsilon >= 0.0 && p.epsilon < 1.0))
    issues.push_back("BadParams: epsilon must lie in [0,1)");
  return issues;
}

} // namespace crowdfuse

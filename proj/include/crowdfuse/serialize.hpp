#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "crowdfuse/simulator.hpp"
#include "crowdfuse/types.hpp"

namespace crowdfuse {

// JSON forms are stable: emitting a parsed document reproduces its bytes.
// All parsers throw Error(SchemaError) with enough context to locate the
// offending field.

nlohmann::json element_to_json(const AnnotationElement& e);
AnnotationElement element_from_json(const nlohmann::json& j, const std::string& ctx);

nlohmann::json params_to_json(const FusionParams& p);
// Patches `base` with whatever keys are present.
FusionParams params_from_json(const nlohmann::json& j, FusionParams base,
                              const std::string& ctx);

nlohmann::json fused_to_json(const FusedResult& fr);
FusedResult fused_from_json(const nlohmann::json& j, const std::string& ctx);

// Input to the offline fuse command: per-task worker results.
struct AnnotationTask {
  std::string task_id;
  std::vector<WorkerResult> results;
};

struct AnnotationSet {
  Category category = Category::ImageClassification;
  std::vector<std::string> class_labels;
  FusionParams params; // category defaults patched by the file
  std::vector<AnnotationTask> tasks;
};

AnnotationSet annotations_from_json(const nlohmann::json& j);

Scenario scenario_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const SimulationReport& rep);

// Task elements for scoring: either a reference file ("elements" under
// each task), a fuse-command output ("fused"), or a simulation report
// ("fused" or "planted" per task).
struct ScoredTask {
  std::string task_id;
  std::vector<AnnotationElement> elements;
};

struct ScoredSet {
  Category category = Category::ImageClassification;
  std::vector<ScoredTask> tasks;
};

ScoredSet scored_set_from_json(const nlohmann::json& j, bool prefer_fused);

// Money renders as a fixed-point decimal string.
std::string format_price(double price);

} // namespace crowdfuse

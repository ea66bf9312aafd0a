#include "crowdfuse/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "crowdfuse/json_util.hpp"

namespace crowdfuse {
namespace {

using nlohmann::json;

double finite_number(const json& obj, const char* key, const std::string& ctx) {
  const double v = jsonio::require_number(obj, key, ctx);
  if (!std::isfinite(v))
    throw Error(Errc::SchemaError, ctx + ": field '" + key + "' must be finite");
  return v;
}

BoundingBox box_from_json(const json& j, const std::string& ctx) {
  BoundingBox b;
  b.x_tl = finite_number(j, "x_tl", ctx);
  b.y_tl = finite_number(j, "y_tl", ctx);
  b.x_br = finite_number(j, "x_br", ctx);
  b.y_br = finite_number(j, "y_br", ctx);
  if (b.x_tl > b.x_br || b.y_tl > b.y_br)
    throw Error(Errc::SchemaError, ctx + ": box corners are inverted");
  return b;
}

void box_to_json(const BoundingBox& b, json& j) {
  j["x_tl"] = b.x_tl;
  j["y_tl"] = b.y_tl;
  j["x_br"] = b.x_br;
  j["y_br"] = b.y_br;
}

} // namespace

nlohmann::json element_to_json(const AnnotationElement& e) {
  json j;
  if (const auto* lbl = std::get_if<ClassLabel>(&e)) {
    j["type"] = "label";
    j["label"] = lbl->value;
  } else if (const auto* cnt = std::get_if<Count>(&e)) {
    j["type"] = "count";
    j["value"] = cnt->value;
  } else if (const auto* box = std::get_if<LabeledBox>(&e)) {
    j["type"] = "box";
    j["label"] = box->label;
    box_to_json(box->box, j);
  } else if (const auto* seg = std::get_if<Segment>(&e)) {
    j["type"] = "segment";
    j["label"] = seg->label;
    j["width"] = seg->width;
    j["height"] = seg->height;
    json pixels = json::array();
    for (std::int64_t c : seg->cells) {
      const auto x = static_cast<std::int64_t>(c % seg->width);
      const auto y = static_cast<std::int64_t>(c / seg->width);
      pixels.push_back(json::array({x, y}));
    }
    j["pixels"] = std::move(pixels);
  } else if (const auto* trk = std::get_if<Track>(&e)) {
    j["type"] = "track";
    j["label"] = trk->label;
    json frames = json::array();
    for (const auto& [f, b] : trk->frames) {
      json fr;
      fr["frame"] = f;
      box_to_json(b, fr);
      frames.push_back(std::move(fr));
    }
    j["frames"] = std::move(frames);
  }
  return j;
}

AnnotationElement element_from_json(const nlohmann::json& j, const std::string& ctx) {
  const std::string type = jsonio::require_string(j, "type", ctx);
  if (type == "label") {
    return AnnotationElement(ClassLabel{jsonio::require_string(j, "label", ctx)});
  }
  if (type == "count") {
    return AnnotationElement(Count{finite_number(j, "value", ctx)});
  }
  if (type == "box") {
    return AnnotationElement(
        LabeledBox{box_from_json(j, ctx), jsonio::require_string(j, "label", ctx)});
  }
  if (type == "segment") {
    const int width = static_cast<int>(jsonio::require_int(j, "width", ctx));
    const int height = static_cast<int>(jsonio::require_int(j, "height", ctx));
    const auto& pixels = jsonio::require(j, "pixels", ctx);
    if (!pixels.is_array() || pixels.empty())
      throw Error(Errc::SchemaError, ctx + ": 'pixels' must be a non-empty array");
    std::vector<std::int64_t> cells;
    cells.reserve(pixels.size());
    for (const auto& p : pixels) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() ||
          !p[1].is_number_integer())
        throw Error(Errc::SchemaError, ctx + ": each pixel must be [x, y]");
      const auto x = p[0].get<std::int64_t>();
      const auto y = p[1].get<std::int64_t>();
      if (x < 0 || y < 0 || x >= width || y >= height)
        throw Error(Errc::SchemaError, ctx + ": pixel outside the grid");
      cells.push_back(y * width + x);
    }
    try {
      return AnnotationElement(Segment::make(
          width, height, jsonio::require_string(j, "label", ctx), std::move(cells)));
    } catch (const Error& e) {
      throw Error(Errc::SchemaError, ctx + ": " + e.what());
    }
  }
  if (type == "track") {
    Track t;
    t.label = jsonio::require_string(j, "label", ctx);
    const auto& frames = jsonio::require(j, "frames", ctx);
    if (!frames.is_array() || frames.empty())
      throw Error(Errc::SchemaError, ctx + ": 'frames' must be a non-empty array");
    for (const auto& fr : frames) {
      const int f = static_cast<int>(jsonio::require_int(fr, "frame", ctx));
      if (t.frames.count(f))
        throw Error(Errc::SchemaError,
                    ctx + ": duplicate frame " + std::to_string(f));
      t.frames[f] = box_from_json(fr, ctx);
    }
    return AnnotationElement(std::move(t));
  }
  throw Error(Errc::SchemaError, ctx + ": unknown element type '" + type + "'");
}

nlohmann::json params_to_json(const FusionParams& p) {
  json j;
  j["n_min"] = p.n_min;
  j["n_max"] = p.n_max;
  j["n_corr"] = p.n_corr;
  j["eta_cov"] = p.eta_cov;
  j["tau"] = p.tau;
  j["beta"] = p.beta;
  j["epsilon"] = p.epsilon;
  return j;
}

FusionParams params_from_json(const nlohmann::json& j, FusionParams base,
                              const std::string& ctx) {
  if (!j.is_object())
    throw Error(Errc::SchemaError, ctx + ": 'params' must be an object");
  static const char* known[] = {"n_min", "n_max", "n_corr", "eta_cov",
                                "tau",   "beta",  "epsilon"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) {
          return key == k;
        }) == std::end(known))
      throw Error(Errc::SchemaError, ctx + ": unknown parameter '" + key + "'");
  }
  base.n_min = static_cast<int>(jsonio::opt_int(j, "n_min", base.n_min));
  base.n_max = static_cast<int>(jsonio::opt_int(j, "n_max", base.n_max));
  base.n_corr = static_cast<int>(jsonio::opt_int(j, "n_corr", base.n_corr));
  base.eta_cov = jsonio::opt_number(j, "eta_cov", base.eta_cov);
  base.tau = jsonio::opt_number(j, "tau", base.tau);
  base.beta = jsonio::opt_number(j, "beta", base.beta);
  base.epsilon = jsonio::opt_number(j, "epsilon", base.epsilon);
  return base;
}

nlohmann::json fused_to_json(const FusedResult& fr) {
  json j;
  j["coverage"] = fr.coverage;
  json corr = json::array();
  for (const auto& ce : fr.corroborated) {
    json item;
    item["element"] = element_to_json(ce.element);
    item["support"] = ce.support;
    corr.push_back(std::move(item));
  }
  j["corroborated"] = std::move(corr);
  j["uncorroborated_groups"] = fr.uncorroborated_groups;
  json accept;
  for (const auto& [worker, hits] : fr.per_worker_accept) accept[worker] = hits;
  j["per_worker_accept"] = std::move(accept);
  return j;
}

FusedResult fused_from_json(const nlohmann::json& j, const std::string& ctx) {
  FusedResult fr;
  fr.coverage = jsonio::require_number(j, "coverage", ctx);
  fr.uncorroborated_groups =
      static_cast<int>(jsonio::require_int(j, "uncorroborated_groups", ctx));
  const auto& corr = jsonio::require(j, "corroborated", ctx);
  if (!corr.is_array())
    throw Error(Errc::SchemaError, ctx + ": 'corroborated' must be an array");
  for (const auto& item : corr) {
    CorroboratedElement ce;
    ce.element = element_from_json(jsonio::require(item, "element", ctx), ctx);
    ce.support = static_cast<int>(jsonio::require_int(item, "support", ctx));
    fr.corroborated.push_back(std::move(ce));
  }
  const auto& accept = jsonio::require(j, "per_worker_accept", ctx);
  if (!accept.is_object())
    throw Error(Errc::SchemaError, ctx + ": 'per_worker_accept' must be an object");
  for (const auto& [worker, hits] : accept.items()) {
    if (!hits.is_number_integer())
      throw Error(Errc::SchemaError, ctx + ": acceptance counts must be integers");
    fr.per_worker_accept[worker] = hits.get<int>();
  }
  return fr;
}

AnnotationSet annotations_from_json(const nlohmann::json& j) {
  const std::string ctx = "annotations";
  AnnotationSet set;
  const std::string cat = jsonio::require_string(j, "category", ctx);
  const auto parsed = category_from_string(cat);
  if (!parsed)
    throw Error(Errc::SchemaError, ctx + ": unknown category '" + cat + "'");
  set.category = *parsed;
  set.params = default_params(set.category);
  if (j.contains("params"))
    set.params = params_from_json(j["params"], set.params, ctx);
  if (j.contains("class_labels")) {
    const auto& labels = j["class_labels"];
    if (!labels.is_array())
      throw Error(Errc::SchemaError, ctx + ": 'class_labels' must be an array");
    for (const auto& l : labels) {
      if (!l.is_string())
        throw Error(Errc::SchemaError, ctx + ": class labels must be strings");
      set.class_labels.push_back(l.get<std::string>());
    }
  }
  const auto& tasks = jsonio::require(j, "tasks", ctx);
  if (!tasks.is_array())
    throw Error(Errc::SchemaError, ctx + ": 'tasks' must be an array");
  for (const auto& tj : tasks) {
    AnnotationTask task;
    task.task_id = jsonio::require_string(tj, "task_id", ctx);
    const std::string tctx = ctx + " task " + task.task_id;
    const auto& results = jsonio::require(tj, "results", tctx);
    if (!results.is_array())
      throw Error(Errc::SchemaError, tctx + ": 'results' must be an array");
    for (const auto& rj : results) {
      WorkerResult r;
      r.task_id = task.task_id;
      r.worker_id = jsonio::require_string(rj, "worker_id", tctx);
      r.duration = jsonio::require_number(rj, "duration", tctx);
      if (!(r.duration > 0) || !std::isfinite(r.duration))
        throw Error(Errc::SchemaError, tctx + ": duration must be > 0");
      r.submit_time = jsonio::opt_number(rj, "submit_time", 0.0);
      const auto& elements = jsonio::require(rj, "elements", tctx);
      if (!elements.is_array())
        throw Error(Errc::SchemaError, tctx + ": 'elements' must be an array");
      for (const auto& ej : elements) {
        AnnotationElement e = element_from_json(ej, tctx);
        if (!element_matches_category(e, set.category))
          throw Error(Errc::CategoryMismatch,
                      tctx + ": element type does not fit category '" + cat + "'");
        r.elements.push_back(std::move(e));
      }
      task.results.push_back(std::move(r));
    }
    set.tasks.push_back(std::move(task));
  }
  return set;
}

Scenario scenario_from_json(const nlohmann::json& j) {
  const std::string ctx = "scenario";
  Scenario s;
  // A fixed seed is the whole point of a reproducible scenario, so it is
  // the one field with no default.
  s.seed = static_cast<std::uint64_t>(jsonio::require_int(j, "seed", ctx));

  const std::string cat = jsonio::require_string(j, "category", ctx);
  const auto parsed = category_from_string(cat);
  if (!parsed)
    throw Error(Errc::SchemaError, ctx + ": unknown category '" + cat + "'");
  s.job.category = *parsed;
  s.job.params = default_params(s.job.category);

  s.worker_count = static_cast<int>(jsonio::require_int(j, "workers", ctx));
  s.num_tasks = static_cast<int>(jsonio::opt_int(j, "num_tasks", 0));
  s.image_width = static_cast<int>(jsonio::opt_int(j, "image_width", s.image_width));
  s.image_height =
      static_cast<int>(jsonio::opt_int(j, "image_height", s.image_height));
  s.objects_min = static_cast<int>(jsonio::opt_int(j, "objects_min", s.objects_min));
  s.objects_max = static_cast<int>(jsonio::opt_int(j, "objects_max", s.objects_max));
  s.count_min = jsonio::opt_number(j, "count_min", s.count_min);
  s.count_max = jsonio::opt_number(j, "count_max", s.count_max);
  s.crowding = jsonio::opt_bool(j, "crowding", s.crowding);
  s.take_probability =
      jsonio::opt_number(j, "take_probability", s.take_probability);
  s.filtering = jsonio::opt_bool(j, "filtering", s.filtering);
  s.max_steps = jsonio::opt_int(j, "max_steps", s.max_steps);

  if (j.contains("admission")) {
    const auto& a = j["admission"];
    s.admission.min_approval_rate =
        jsonio::opt_number(a, "min_approval_rate", s.admission.min_approval_rate);
    s.admission.exploration_share =
        jsonio::opt_number(a, "exploration_share", s.admission.exploration_share);
  }

  if (j.contains("class_labels")) {
    const auto& labels = j["class_labels"];
    if (!labels.is_array())
      throw Error(Errc::SchemaError, ctx + ": 'class_labels' must be an array");
    for (const auto& l : labels) {
      if (!l.is_string())
        throw Error(Errc::SchemaError, ctx + ": class labels must be strings");
      s.job.class_labels.push_back(l.get<std::string>());
    }
  }

  const auto& pop = jsonio::require(j, "population", ctx);
  if (!pop.is_array() || pop.empty())
    throw Error(Errc::SchemaError, ctx + ": 'population' must be a non-empty array");
  for (const auto& pj : pop) {
    PopulationSlice slice;
    const std::string kind = jsonio::require_string(pj, "kind", ctx);
    const auto parsed_kind = worker_kind_from_string(kind);
    if (!parsed_kind)
      throw Error(Errc::SchemaError, ctx + ": unknown worker kind '" + kind + "'");
    slice.model.kind = *parsed_kind;
    slice.fraction = jsonio::require_number(pj, "fraction", ctx);
    slice.model.sigma = jsonio::opt_number(pj, "sigma", 0.0);
    slice.model.label_flip = jsonio::opt_number(pj, "label_flip", 0.0);
    slice.model.p_miss = jsonio::opt_number(pj, "p_miss", 0.0);
    slice.model.count_bias = jsonio::opt_number(pj, "count_bias", 0.0);
    slice.model.speed_mu = jsonio::opt_number(pj, "speed_mu", slice.model.speed_mu);
    slice.model.speed_sigma =
        jsonio::opt_number(pj, "speed_sigma", slice.model.speed_sigma);
    s.population.push_back(slice);
  }

  if (j.contains("video")) {
    const auto& vj = j["video"];
    VideoConfig vc;
    vc.num_videos = static_cast<int>(jsonio::require_int(vj, "num_videos", ctx));
    vc.chunks_per_video =
        static_cast<int>(jsonio::opt_int(vj, "chunks_per_video", vc.chunks_per_video));
    vc.chunk_frames =
        static_cast<int>(jsonio::opt_int(vj, "chunk_frames", vc.chunk_frames));
    vc.overlap_frames =
        static_cast<int>(jsonio::opt_int(vj, "overlap_frames", vc.overlap_frames));
    if (vc.num_videos < 1 || vc.chunks_per_video < 1 ||
        vc.overlap_frames < 1 || vc.chunk_frames <= vc.overlap_frames)
      throw Error(Errc::SchemaError, ctx + ": invalid video section");
    s.video = vc;
  }
  if (s.job.category == Category::Tracking && !s.video)
    throw Error(Errc::SchemaError, ctx + ": tracking scenarios need 'video'");
  if (s.job.category != Category::Tracking && s.num_tasks < 1)
    throw Error(Errc::SchemaError, ctx + ": 'num_tasks' must be >= 1");

  const auto& jj = j.contains("job") ? j["job"] : json::object();
  s.job.job_id = jj.contains("job_id")
                     ? jsonio::require_string(jj, "job_id", ctx)
                     : "job0";
  s.job.target_hourly_rate =
      jsonio::opt_number(jj, "target_hourly_rate", s.job.target_hourly_rate);
  s.job.initial_hit_price =
      jsonio::opt_number(jj, "initial_hit_price", s.job.initial_hit_price);
  s.job.batch_size = static_cast<int>(jsonio::opt_int(jj, "batch_size", s.job.batch_size));
  s.job.payment_threshold =
      jsonio::opt_number(jj, "payment_threshold", s.job.payment_threshold);
  if (jj.contains("params"))
    s.job.params = params_from_json(jj["params"], s.job.params, ctx);

  const auto issues = validate_job(s.job);
  if (!issues.empty()) {
    std::string msg = ctx + ": job spec rejected:";
    for (const auto& i : issues) msg += " " + i;
    throw Error(Errc::SchemaError, msg);
  }
  return s;
}

std::string format_price(double price) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", price);
  return buf;
}

nlohmann::json report_to_json(const SimulationReport& rep) {
  json j;
  j["format_version"] = 1;
  j["kind"] = "simulation_report";
  j["job_id"] = rep.job_id;
  j["category"] = to_string(rep.category);
  j["seed"] = rep.seed;
  j["all_tasks_done"] = rep.all_tasks_done;
  j["budget_exhausted"] = rep.budget_exhausted;
  j["sim_time_end"] = rep.sim_time_end;
  j["events"] = rep.events;

  json totals;
  totals["results"] = rep.total_results;
  totals["results_approved"] = rep.results_approved;
  totals["results_rejected"] = rep.results_rejected;
  totals["approval_rate"] = rep.approval_rate();
  totals["hits_listed"] = rep.hits_listed;
  totals["hits_paid"] = rep.hits_paid;
  totals["hits_rejected"] = rep.hits_rejected;
  totals["hits_disposed"] = rep.hits_disposed;
  totals["paid_out"] = format_price(rep.paid_out);
  j["totals"] = std::move(totals);

  json trace = json::array();
  for (double p : rep.price_trace) trace.push_back(format_price(p));
  j["price_trace"] = std::move(trace);

  json histogram = json::array();
  for (const auto& [results, count] : rep.results_histogram)
    histogram.push_back(json::array({results, count}));
  j["results_histogram"] = std::move(histogram);

  json tasks = json::array();
  for (const auto& t : rep.tasks) {
    json tj;
    tj["task_id"] = t.task_id;
    tj["media"] = t.media;
    tj["status"] = to_string(t.status);
    tj["results"] = t.results;
    tj["first_fusion_at"] = t.first_fusion_at;
    tj["max_parallel_relaunch"] = t.max_parallel_relaunch;
    json planted = json::array();
    for (const auto& e : t.planted) planted.push_back(element_to_json(e));
    tj["planted"] = std::move(planted);
    tj["fused"] = t.fused ? fused_to_json(*t.fused) : json();
    if (t.fused_count) tj["fused_count"] = *t.fused_count;
    tasks.push_back(std::move(tj));
  }
  j["tasks"] = std::move(tasks);

  json workers = json::array();
  for (const auto& w : rep.workers) {
    json wj;
    wj["worker_id"] = w.worker_id;
    wj["kind"] = to_string(w.kind);
    wj["results"] = w.results;
    wj["approved"] = w.approved;
    wj["rejected"] = w.rejected;
    wj["hits_paid"] = w.hits_paid;
    wj["hits_rejected"] = w.hits_rejected;
    workers.push_back(std::move(wj));
  }
  j["workers"] = std::move(workers);

  if (!rep.videos.empty()) {
    json videos = json::array();
    for (const auto& v : rep.videos) {
      json vj;
      vj["video"] = v.video;
      vj["planted_tracks"] = v.planted_tracks;
      vj["stitched_tracks"] = static_cast<int>(v.stitched.size());
      json tracks = json::array();
      for (const auto& t : v.stitched)
        tracks.push_back(element_to_json(AnnotationElement(t)));
      vj["tracks"] = std::move(tracks);
      videos.push_back(std::move(vj));
    }
    j["videos"] = std::move(videos);
  }
  return j;
}

ScoredSet scored_set_from_json(const nlohmann::json& j, bool prefer_fused) {
  const std::string ctx = "scored set";
  ScoredSet set;
  const std::string cat = jsonio::require_string(j, "category", ctx);
  const auto parsed = category_from_string(cat);
  if (!parsed)
    throw Error(Errc::SchemaError, ctx + ": unknown category '" + cat + "'");
  set.category = *parsed;

  const auto& tasks = jsonio::require(j, "tasks", ctx);
  if (!tasks.is_array())
    throw Error(Errc::SchemaError, ctx + ": 'tasks' must be an array");
  for (const auto& tj : tasks) {
    ScoredTask task;
    task.task_id = jsonio::require_string(tj, "task_id", ctx);
    const std::string tctx = ctx + " task " + task.task_id;
    const char* field = nullptr;
    if (prefer_fused && tj.contains("fused")) field = "fused";
    else if (!prefer_fused && tj.contains("elements")) field = "elements";
    else if (!prefer_fused && tj.contains("planted")) field = "planted";
    else if (tj.contains("fused")) field = "fused";
    if (!field)
      throw Error(Errc::SchemaError,
                  tctx + ": no 'fused', 'elements' or 'planted' to score");
    const auto& src = tj[field];
    if (std::string(field) == "fused") {
      if (!src.is_null()) {
        const FusedResult fr = fused_from_json(src, tctx);
        for (const auto& ce : fr.corroborated) task.elements.push_back(ce.element);
      }
    } else {
      if (!src.is_array())
        throw Error(Errc::SchemaError, tctx + ": element list expected");
      for (const auto& ej : src)
        task.elements.push_back(element_from_json(ej, tctx));
    }
    for (const auto& e : task.elements)
      if (!element_matches_category(e, set.category))
        throw Error(Errc::CategoryMismatch,
                    tctx + ": element type does not fit category '" + cat + "'");
    set.tasks.push_back(std::move(task));
  }
  return set;
}

} // namespace crowdfuse

#include "crowdfuse/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <tuple>

#include "crowdfuse/fusion.hpp"
#include "crowdfuse/geometry.hpp"
#include "crowdfuse/quality.hpp"

namespace crowdfuse {

const char* to_string(WorkerKind k) {
  switch (k) {
    case WorkerKind::Perfect: return "perfect";
    case WorkerKind::Jittered: return "jittered";
    case WorkerKind::Lazy: return "lazy";
    case WorkerKind::Spammer: return "spammer";
    case WorkerKind::Overcounter: return "overcounter";
  }
  return "unknown";
}

std::optional<WorkerKind> worker_kind_from_string(std::string_view s) {
  if (s == "perfect") return WorkerKind::Perfect;
  if (s == "jittered") return WorkerKind::Jittered;
  if (s == "lazy") return WorkerKind::Lazy;
  if (s == "spammer") return WorkerKind::Spammer;
  if (s == "overcounter") return WorkerKind::Overcounter;
  return std::nullopt;
}

int scenario_task_count(const Scenario& s) {
  if (s.job.category == Category::Tracking) {
    if (!s.video)
      throw Error(Errc::BadArgument, "tracking scenarios need a video section");
    return s.video->num_videos * s.video->chunks_per_video;
  }
  return s.num_tasks;
}

std::string scenario_task_id(const Scenario& s, int task_index) {
  char buf[32];
  if (s.job.category == Category::Tracking) {
    const int cpv = s.video->chunks_per_video;
    std::snprintf(buf, sizeof buf, "v%02dc%02d", task_index / cpv, task_index % cpv);
  } else {
    std::snprintf(buf, sizeof buf, "t%04d", task_index);
  }
  return buf;
}

namespace {

double object_lo(double dim) { return std::max(8.0, dim / 32.0); }
double object_hi(double dim) { return std::max(16.0, dim / 8.0); }

BoundingBox sample_box(Rng& rng, double w_img, double h_img) {
  const double w = rng.uniform(object_lo(w_img), object_hi(w_img));
  const double h = rng.uniform(object_lo(h_img), object_hi(h_img));
  const double x = rng.uniform(0.0, w_img - w);
  const double y = rng.uniform(0.0, h_img - h);
  return {x, y, x + w, y + h};
}

bool overlaps_any(const BoundingBox& b, const std::vector<BoundingBox>& placed) {
  for (const auto& p : placed) {
    if (b.area() == 0 && p.area() == 0) continue;
    if (iou_box(b, p) >= 0.3) return true;
  }
  return false;
}

// Non-crowded scenes keep planted objects pairwise below 0.3 IoU.
// Rejection sampling almost always succeeds; a deterministic grid scan
// backs it up so the requested object count is always honored.
std::vector<BoundingBox> sample_layout(Rng& rng, int k, double w_img, double h_img,
                                       bool crowding) {
  std::vector<BoundingBox> placed;
  placed.reserve(k);
  for (int i = 0; i < k; ++i) {
    bool done = false;
    for (int attempt = 0; attempt < 500 && !done; ++attempt) {
      BoundingBox b = sample_box(rng, w_img, h_img);
      if (crowding || !overlaps_any(b, placed)) {
        placed.push_back(b);
        done = true;
      }
    }
    if (done) continue;
    const double w = object_lo(w_img);
    const double h = object_lo(h_img);
    const double step_x = std::max(1.0, w * 1.25);
    const double step_y = std::max(1.0, h * 1.25);
    for (double y = 0; y + h <= h_img && !done; y += step_y) {
      for (double x = 0; x + w <= w_img && !done; x += step_x) {
        BoundingBox b{x, y, x + w, y + h};
        if (!overlaps_any(b, placed)) {
          placed.push_back(b);
          done = true;
        }
      }
    }
    if (!done)
      throw Error(Errc::BadArgument, "image too small for the requested objects");
  }
  return placed;
}

std::int64_t cell_of(int x, int y, int width) {
  return static_cast<std::int64_t>(y) * width + x;
}

Segment rect_segment(const BoundingBox& b, int width, int height,
                     const std::string& label) {
  const int x0 = std::max(0, static_cast<int>(std::floor(b.x_tl)));
  const int y0 = std::max(0, static_cast<int>(std::floor(b.y_tl)));
  const int x1 = std::min(width - 1, static_cast<int>(std::floor(b.x_br)));
  const int y1 = std::min(height - 1, static_cast<int>(std::floor(b.y_br)));
  std::vector<std::int64_t> cells;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) cells.push_back(cell_of(x, y, width));
  return Segment::make(width, height, label, std::move(cells));
}

std::string pick_label(const Scenario& s, Rng& rng) {
  const auto& labels = s.job.class_labels;
  if (labels.empty())
    throw Error(Errc::BadArgument, "scenario has no class labels to draw from");
  return labels[rng.uniform_int(labels.size())];
}

int video_total_frames(const VideoConfig& vc) {
  return (vc.chunks_per_video - 1) * (vc.chunk_frames - vc.overlap_frames) +
         vc.chunk_frames;
}

std::vector<Track> generate_video_tracks(const Scenario& s, int video) {
  Rng rng = Rng::stream(s.seed, "scene", static_cast<std::uint64_t>(video));
  const VideoConfig& vc = *s.video;
  const int frames = video_total_frames(vc);
  const double w_img = s.image_width;
  const double h_img = s.image_height;
  const int span = s.objects_max - s.objects_min + 1;
  const int k = s.objects_min + static_cast<int>(rng.uniform_int(span));

  std::vector<Track> tracks;
  for (int i = 0; i < k; ++i) {
    Track best;
    bool ok = false;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      const double w = rng.uniform(object_lo(w_img), object_hi(w_img));
      const double h = rng.uniform(object_lo(h_img), object_hi(h_img));
      const double vx = rng.uniform(-3.0, 3.0);
      const double vy = rng.uniform(-3.0, 3.0);
      const double span_x = vx * (frames - 1);
      const double span_y = vy * (frames - 1);
      const double lo_x = std::max(0.0, -span_x);
      const double hi_x = w_img - w - std::max(0.0, span_x);
      const double lo_y = std::max(0.0, -span_y);
      const double hi_y = h_img - h - std::max(0.0, span_y);
      if (hi_x < lo_x || hi_y < lo_y) continue;
      const double x0 = rng.uniform(lo_x, hi_x);
      const double y0 = rng.uniform(lo_y, hi_y);
      Track t;
      t.label = pick_label(s, rng);
      for (int f = 0; f < frames; ++f) {
        const double x = x0 + vx * f;
        const double y = y0 + vy * f;
        t.frames[f] = {x, y, x + w, y + h};
      }
      ok = true;
      // Keep objects separable so tracks never look like one another.
      for (const auto& other : tracks) {
        double overlap = 0;
        try {
          overlap = iou_3d(t, other);
        } catch (const Error&) {
          overlap = 0;
        }
        if (overlap >= 0.3) {
          ok = false;
          break;
        }
      }
      if (ok) best = std::move(t);
    }
    if (!ok)
      throw Error(Errc::BadArgument, "could not place the requested tracks");
    tracks.push_back(std::move(best));
  }
  return tracks;
}

} // namespace

SceneTruth generate_scene(const Scenario& s, int task_index) {
  SceneTruth truth;
  const Category cat = s.job.category;

  if (cat == Category::Tracking) {
    const VideoConfig& vc = *s.video;
    const int video = task_index / vc.chunks_per_video;
    const int chunk = task_index % vc.chunks_per_video;
    truth.frame_begin = chunk * (vc.chunk_frames - vc.overlap_frames);
    truth.frame_end = truth.frame_begin + vc.chunk_frames - 1;
    for (const auto& full : generate_video_tracks(s, video)) {
      Track t;
      t.label = full.label;
      for (int f = truth.frame_begin; f <= truth.frame_end; ++f) {
        auto it = full.frames.find(f);
        if (it != full.frames.end()) t.frames[f] = it->second;
      }
      if (!t.frames.empty()) truth.elements.push_back(AnnotationElement(std::move(t)));
    }
    return truth;
  }

  Rng rng = Rng::stream(s.seed, "scene", static_cast<std::uint64_t>(task_index));
  switch (cat) {
    case Category::ImageClassification:
    case Category::VideoClassification:
      truth.elements.push_back(AnnotationElement(ClassLabel{pick_label(s, rng)}));
      break;
    case Category::Counting: {
      const double c = std::round(rng.uniform(s.count_min, s.count_max));
      truth.elements.push_back(AnnotationElement(Count{c}));
      break;
    }
    case Category::Detection: {
      const int span = s.objects_max - s.objects_min + 1;
      const int k = s.objects_min + static_cast<int>(rng.uniform_int(span));
      for (const auto& b :
           sample_layout(rng, k, s.image_width, s.image_height, s.crowding))
        truth.elements.push_back(AnnotationElement(LabeledBox{b, pick_label(s, rng)}));
      break;
    }
    case Category::Segmentation: {
      const int span = s.objects_max - s.objects_min + 1;
      const int k = s.objects_min + static_cast<int>(rng.uniform_int(span));
      for (const auto& b :
           sample_layout(rng, k, s.image_width, s.image_height, s.crowding))
        truth.elements.push_back(AnnotationElement(
            rect_segment(b, s.image_width, s.image_height, pick_label(s, rng))));
      break;
    }
    case Category::Tracking:
      break; // handled above
  }
  return truth;
}

namespace {

std::string flip_label(const std::string& current, const Scenario& s, Rng& rng) {
  const auto& labels = s.job.class_labels;
  if (labels.size() < 2) return current;
  std::size_t pos = labels.size();
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == current) {
      pos = i;
      break;
    }
  if (pos == labels.size()) return labels[rng.uniform_int(labels.size())];
  std::size_t pick = rng.uniform_int(labels.size() - 1);
  if (pick >= pos) ++pick;
  return labels[pick];
}

BoundingBox jitter_box(const BoundingBox& b, double sigma, const Scenario& s,
                       Rng& rng) {
  BoundingBox out{b.x_tl + rng.normal(0, sigma), b.y_tl + rng.normal(0, sigma),
                  b.x_br + rng.normal(0, sigma), b.y_br + rng.normal(0, sigma)};
  out.x_tl = std::clamp(out.x_tl, 0.0, static_cast<double>(s.image_width));
  out.y_tl = std::clamp(out.y_tl, 0.0, static_cast<double>(s.image_height));
  out.x_br = std::clamp(out.x_br, 0.0, static_cast<double>(s.image_width));
  out.y_br = std::clamp(out.y_br, 0.0, static_cast<double>(s.image_height));
  if (out.x_tl > out.x_br) std::swap(out.x_tl, out.x_br);
  if (out.y_tl > out.y_br) std::swap(out.y_tl, out.y_br);
  return out;
}

Segment shift_segment(const Segment& seg, double sigma, Rng& rng) {
  const int dx = static_cast<int>(std::lround(rng.normal(0, sigma)));
  const int dy = static_cast<int>(std::lround(rng.normal(0, sigma)));
  std::vector<std::int64_t> cells;
  cells.reserve(seg.cells.size());
  for (std::int64_t c : seg.cells) {
    const int x = static_cast<int>(c % seg.width) + dx;
    const int y = static_cast<int>(c / seg.width) + dy;
    if (x < 0 || y < 0 || x >= seg.width || y >= seg.height) continue;
    cells.push_back(cell_of(x, y, seg.width));
  }
  if (cells.empty()) cells = seg.cells; // a mask must keep at least one pixel
  Segment out;
  out.width = seg.width;
  out.height = seg.height;
  out.label = seg.label;
  std::sort(cells.begin(), cells.end());
  out.cells = std::move(cells);
  return out;
}

Track spam_track(const SceneTruth& truth, const Scenario& s, Rng& rng) {
  Track t;
  t.label = pick_label(s, rng);
  BoundingBox base = sample_box(rng, s.image_width, s.image_height);
  const double vx = rng.uniform(-3.0, 3.0);
  const double vy = rng.uniform(-3.0, 3.0);
  for (int f = truth.frame_begin; f <= truth.frame_end; ++f) {
    const double off = f - truth.frame_begin;
    t.frames[f] = {base.x_tl + vx * off, base.y_tl + vy * off,
                   base.x_br + vx * off, base.y_br + vy * off};
  }
  return t;
}

} // namespace

WorkerResult worker_respond(const WorkerModel& model, const std::string& task_id,
                            const SceneTruth& truth, const Scenario& s, Rng& rng) {
  WorkerResult r;
  r.task_id = task_id;
  r.duration = rng.lognormal(model.speed_mu, model.speed_sigma);

  const Category cat = s.job.category;
  switch (model.kind) {
    case WorkerKind::Perfect:
      r.elements = truth.elements;
      break;

    case WorkerKind::Jittered:
      for (const auto& e : truth.elements) {
        if (const auto* lbl = std::get_if<ClassLabel>(&e)) {
          std::string out = lbl->value;
          if (rng.uniform() < model.label_flip) out = flip_label(out, s, rng);
          r.elements.push_back(AnnotationElement(ClassLabel{out}));
        } else if (const auto* cnt = std::get_if<Count>(&e)) {
          double v = std::round(cnt->value + rng.normal(0, model.sigma));
          r.elements.push_back(AnnotationElement(Count{std::max(0.0, v)}));
        } else if (const auto* box = std::get_if<LabeledBox>(&e)) {
          std::string out = box->label;
          if (rng.uniform() < model.label_flip) out = flip_label(out, s, rng);
          r.elements.push_back(AnnotationElement(
              LabeledBox{jitter_box(box->box, model.sigma, s, rng), out}));
        } else if (const auto* seg = std::get_if<Segment>(&e)) {
          Segment out = shift_segment(*seg, model.sigma, rng);
          if (rng.uniform() < model.label_flip) out.label = flip_label(out.label, s, rng);
          r.elements.push_back(AnnotationElement(std::move(out)));
        } else if (const auto* trk = std::get_if<Track>(&e)) {
          Track out;
          out.label = trk->label;
          if (rng.uniform() < model.label_flip) out.label = flip_label(out.label, s, rng);
          for (const auto& [f, b] : trk->frames)
            out.frames[f] = jitter_box(b, model.sigma, s, rng);
          r.elements.push_back(AnnotationElement(std::move(out)));
        }
      }
      break;

    case WorkerKind::Lazy:
      for (const auto& e : truth.elements) {
        const bool spatial = std::holds_alternative<LabeledBox>(e) ||
                             std::holds_alternative<Segment>(e) ||
                             std::holds_alternative<Track>(e);
        if (spatial && rng.uniform() < model.p_miss) continue;
        r.elements.push_back(e);
      }
      break;

    case WorkerKind::Spammer:
      switch (cat) {
        case Category::ImageClassification:
        case Category::VideoClassification:
          r.elements.push_back(AnnotationElement(ClassLabel{pick_label(s, rng)}));
          break;
        case Category::Counting:
          r.elements.push_back(AnnotationElement(
              Count{std::round(rng.uniform(0.0, 2.0 * s.count_max))}));
          break;
        case Category::Detection: {
          const int m = 1 + static_cast<int>(rng.uniform_int(std::max(1, s.objects_max)));
          for (int i = 0; i < m; ++i)
            r.elements.push_back(AnnotationElement(LabeledBox{
                sample_box(rng, s.image_width, s.image_height), pick_label(s, rng)}));
          break;
        }
        case Category::Segmentation: {
          const int m = 1 + static_cast<int>(rng.uniform_int(std::max(1, s.objects_max)));
          for (int i = 0; i < m; ++i)
            r.elements.push_back(AnnotationElement(
                rect_segment(sample_box(rng, s.image_width, s.image_height),
                             s.image_width, s.image_height, pick_label(s, rng))));
          break;
        }
        case Category::Tracking: {
          const int m = 1 + static_cast<int>(rng.uniform_int(std::max(1, s.objects_max)));
          for (int i = 0; i < m; ++i)
            r.elements.push_back(AnnotationElement(spam_track(truth, s, rng)));
          break;
        }
      }
      break;

    case WorkerKind::Overcounter:
      for (const auto& e : truth.elements) {
        if (const auto* cnt = std::get_if<Count>(&e)) {
          r.elements.push_back(AnnotationElement(
              Count{std::round(cnt->value * (1.0 + model.count_bias))}));
        } else {
          r.elements.push_back(e);
        }
      }
      break;
  }
  return r;
}

namespace {

struct SimTask {
  TaskState state;
  SceneTruth truth;
  int index = 0;
  int wanted = 0;
  int outstanding = 0;
  int first_fusion_at = 0;
  int max_parallel_relaunch = 0;
  bool fused_once = false;
  std::optional<double> fused_count;
  std::map<std::string, bool> verdicts;
};

struct SimWorker {
  std::string id;
  WorkerModel model;
  Rng rng;
  double busy_until = 0;
  WorkerReport report;

  SimWorker(std::string id_, WorkerModel m, Rng r)
      : id(std::move(id_)), model(m), rng(r) {}
};

struct PendingResult {
  int task;
  WorkerResult result;
};

struct SimHit {
  HitRecord rec;
  int worker = -1;
  std::vector<int> task_idx;
  std::vector<PendingResult> pending;
  bool bound = false;
  bool settled = false;
};

struct Event {
  double time;
  long seq;
  int kind; // 0 tick, 1 submission
  int index;
};

struct LaterEvent {
  bool operator()(const Event& a, const Event& b) const {
    return std::tie(a.time, a.seq) > std::tie(b.time, b.seq);
  }
};

} // namespace

SimulationReport run_job(const Scenario& scenario, const JobSpec& job) {
  {
    const auto issues = validate_job(job);
    if (!issues.empty()) {
      std::string msg = "job spec rejected:";
      for (const auto& i : issues) msg += " " + i;
      throw Error(Errc::BadArgument, msg);
    }
  }
  if (scenario.worker_count <= 0)
    throw Error(Errc::BadArgument, "scenario needs at least one worker");
  if (scenario.population.empty())
    throw Error(Errc::BadArgument, "scenario population is empty");
  if (!(scenario.take_probability > 0))
    throw Error(Errc::BadArgument, "take_probability must be positive");

  const int task_count = scenario_task_count(scenario);
  if (task_count <= 0)
    throw Error(Errc::BadArgument, "scenario defines no tasks");

  // --- state ----------------------------------------------------------
  std::vector<SimTask> tasks(task_count);
  std::map<std::string, int> task_index;
  for (int i = 0; i < task_count; ++i) {
    SimTask& t = tasks[i];
    t.index = i;
    t.state.task_id = scenario_task_id(scenario, i);
    t.state.job_id = job.job_id;
    t.state.media = i < static_cast<int>(job.task_sources.size())
                        ? job.task_sources[i]
                        : "synthetic://" + t.state.task_id;
    t.truth = generate_scene(scenario, i);
    t.wanted = job.params.n_min;
    task_index[t.state.task_id] = i;
  }

  double fraction_total = 0;
  for (const auto& slice : scenario.population) fraction_total += slice.fraction;
  if (fraction_total <= 0)
    throw Error(Errc::BadArgument, "population fractions must sum to > 0");

  std::vector<SimWorker> workers;
  workers.reserve(scenario.worker_count);
  for (int w = 0; w < scenario.worker_count; ++w) {
    const double x = (w + 0.5) / scenario.worker_count * fraction_total;
    double cum = 0;
    const WorkerModel* model = &scenario.population.back().model;
    for (const auto& slice : scenario.population) {
      cum += slice.fraction;
      if (x < cum) {
        model = &slice.model;
        break;
      }
    }
    char buf[16];
    std::snprintf(buf, sizeof buf, "w%03d", w);
    workers.emplace_back(buf, *model,
                         Rng::stream(scenario.seed, "worker", static_cast<std::uint64_t>(w)));
    workers.back().report.worker_id = buf;
    workers.back().report.kind = model->kind;
  }

  PricingState pricing;
  pricing.job_id = job.job_id;
  pricing.target_hourly_rate = job.target_hourly_rate;
  pricing.current_price = job.initial_hit_price;

  std::vector<SimHit> hits;
  std::map<std::string, WorkerProfile> profiles;
  Rng admission_rng = Rng::stream(scenario.seed, "admission");
  Rng select_rng = Rng::stream(scenario.seed, "select");
  Rng arrival_rng = Rng::stream(scenario.seed, "arrival");

  // Early assignments stay inside a small leading subgroup of tasks until
  // those are done, so the price settles before the bulk of the work.
  const int subgroup =
      std::min(task_count, std::max(10, 2 * job.params.n_min));
  int subgroup_open = subgroup;
  int open_tasks = task_count;

  SimulationReport rep;
  rep.job_id = job.job_id;
  rep.category = job.category;
  rep.seed = scenario.seed;

  std::priority_queue<Event, std::vector<Event>, LaterEvent> queue;
  long seq = 0;
  queue.push({0.0, seq++, 0, 0});
  long events = 0;
  double now = 0;
  std::size_t hit_cursor = 0; // first possibly-acceptable HIT

  std::vector<const TaskState*> task_views;
  task_views.reserve(task_count);
  for (const auto& t : tasks) task_views.push_back(&t.state);

  const auto has_slot = [&](const TaskState& ts) {
    const SimTask& st = tasks[task_index.at(ts.task_id)];
    return static_cast<int>(st.state.results.size()) + st.outstanding < st.wanted;
  };
  const auto in_subgroup = [&](const TaskState& ts) {
    return task_index.at(ts.task_id) < subgroup;
  };
  // The subgroup restriction ends when its tasks are done. It is also
  // lifted for good if the whole roster has served every open subgroup
  // task, since nobody could push those tasks further and the job would
  // stall otherwise.
  bool subgroup_lifted = false;
  const auto subgroup_active = [&]() {
    if (subgroup_open <= 0 || subgroup_lifted) return false;
    for (int i = 0; i < subgroup; ++i) {
      const SimTask& st = tasks[i];
      if (st.state.status == TaskStatus::Open &&
          st.state.served_workers.size() < workers.size())
        return true;
    }
    subgroup_lifted = true;
    return false;
  };

  // --- event loop ------------------------------------------------------
  while (!queue.empty()) {
    if (++events > scenario.max_steps) {
      rep.budget_exhausted = true;
      break;
    }
    const Event ev = queue.top();
    queue.pop();
    now = ev.time;

    if (ev.kind == 0) {
      // Listing keeps one HIT per batch of open tasks on the market;
      // without open tasks the leftover listings come down.
      if (open_tasks > 0) {
        int unfinished = 0;
        for (const auto& h : hits)
          if (h.rec.status == HitStatus::Listed) ++unfinished;
        const int deficit =
            compute_deficit(open_tasks, unfinished, job.batch_size);
        for (int d = 0; d < deficit; ++d) {
          SimHit h;
          char buf[16];
          std::snprintf(buf, sizeof buf, "h%06d", static_cast<int>(hits.size()));
          h.rec.hit_id = buf;
          h.rec.job_id = job.job_id;
          h.rec.price = pricing.current_price * job.batch_size;
          hits.push_back(std::move(h));
        }
      } else {
        for (auto& h : hits)
          if (h.rec.status == HitStatus::Listed && !h.bound)
            h.rec.status = HitStatus::Disposed;
      }

      // Free workers show up in a fresh random order each tick; a fixed
      // scan order would hand the front of the roster first pick forever.
      std::vector<std::size_t> arrivals;
      arrivals.reserve(workers.size());
      for (std::size_t w = 0; w < workers.size(); ++w)
        if (workers[w].busy_until <= now) arrivals.push_back(w);
      for (std::size_t i = arrivals.size(); i > 1; --i)
        std::swap(arrivals[i - 1], arrivals[arrival_rng.uniform_int(i)]);

      for (const std::size_t w : arrivals) {
        SimWorker& wk = workers[w];
        if (wk.rng.uniform() >= scenario.take_probability) continue;

        while (hit_cursor < hits.size() &&
               (hits[hit_cursor].bound ||
                hits[hit_cursor].rec.status != HitStatus::Listed))
          ++hit_cursor;
        if (hit_cursor >= hits.size()) continue;
        SimHit& hit = hits[hit_cursor];

        if (scenario.filtering) {
          const double draw = admission_rng.uniform();
          auto it = profiles.find(wk.id);
          const WorkerProfile* profile =
              it == profiles.end() ? nullptr : &it->second;
          if (!admit_worker(profile, job.job_id, scenario.admission, draw))
            continue;
        }

        std::vector<std::string> picked;
        const bool restricted = subgroup_active();
        try {
          picked = select_tasks(
              wk.id, job.job_id, job.batch_size, task_views, select_rng,
              [&](const TaskState& ts) {
                return has_slot(ts) && (!restricted || in_subgroup(ts));
              });
        } catch (const Error& e) {
          if (e.code() != Errc::NoEligibleTasks) throw;
          continue; // nothing this worker can take right now
        }
        if (picked.empty()) continue;

        hit.bound = true;
        hit.worker = static_cast<int>(w);
        hit.rec.worker_id = wk.id;
        double total_duration = 0;
        for (const auto& id : picked) {
          const int ti = task_index.at(id);
          SimTask& st = tasks[ti];
          hit.rec.task_ids.push_back(id);
          hit.task_idx.push_back(ti);
          ++st.outstanding;
          if (st.fused_once)
            st.max_parallel_relaunch =
                std::max(st.max_parallel_relaunch, st.outstanding);
          st.state.served_workers.insert(wk.id);
          WorkerResult res =
              worker_respond(wk.model, id, st.truth, scenario, wk.rng);
          res.worker_id = wk.id;
          total_duration += res.duration;
          hit.pending.push_back({ti, std::move(res)});
        }
        wk.busy_until = now + total_duration;
        queue.push({wk.busy_until, seq++, 1, static_cast<int>(hit_cursor)});
      }

      if (open_tasks > 0) queue.push({now + 1.0, seq++, 0, 0});
      continue;
    }

    // Submission: deliver results, run the consensus step per affected
    // task, then settle every HIT whose verdicts are complete.
    SimHit& hit = hits[ev.index];
    hit.rec.status = HitStatus::Submitted;
    SimWorker& wk = workers[hit.worker];
    for (auto& p : hit.pending) {
      SimTask& st = tasks[p.task];
      p.result.submit_time = now;
      st.state.results.push_back(std::move(p.result));
      --st.outstanding;
      ++wk.report.results;
      ++rep.total_results;
    }
    for (const auto& p : hit.pending) {
      SimTask& st = tasks[p.task];
      if (st.state.status != TaskStatus::Open) continue;
      if (static_cast<int>(st.state.results.size()) < st.wanted) continue;

      LoopDecision dec = qc_step(st.state, job.category, job.params);
      if (!st.fused_once &&
          static_cast<int>(st.state.results.size()) >= job.params.n_min) {
        st.fused_once = true;
        st.first_fusion_at = static_cast<int>(st.state.results.size());
      }
      if (dec.aggregated) {
        apply_decision(st.state, dec);
        st.fused_count = dec.outcome->fused_count;
        st.verdicts = evaluate_results(st.state.results, job.category,
                                       job.params, *dec.outcome);
        purge_task(st.state);
        --open_tasks;
        if (st.index < subgroup) --subgroup_open;
      } else {
        st.wanted = std::min(
            job.params.n_max,
            std::max(job.params.n_min,
                     static_cast<int>(st.state.results.size()) + dec.solicit));
      }
    }
    hit.pending.clear();

    for (auto& h : hits) {
      if (h.rec.status != HitStatus::Submitted || h.settled) continue;
      bool ready = true;
      for (int ti : h.task_idx) {
        const SimTask& st = tasks[ti];
        if (st.state.status != TaskStatus::Purged ||
            !st.verdicts.count(*h.rec.worker_id)) {
          ready = false;
          break;
        }
      }
      if (!ready) continue;

      std::vector<bool> accepts;
      accepts.reserve(h.task_idx.size());
      for (int ti : h.task_idx)
        accepts.push_back(tasks[ti].verdicts.at(*h.rec.worker_id));
      WorkerProfile& profile = profiles[*h.rec.worker_id];
      profile.worker_id = *h.rec.worker_id;
      const Settlement outcome =
          settle_hit(h.rec, accepts, job.payment_threshold, profile);
      h.settled = true;
      SimWorker& owner = workers[h.worker];
      if (outcome == Settlement::Paid) {
        ++owner.report.hits_paid;
        ++rep.hits_paid;
        rep.paid_out += h.rec.price;
      } else {
        ++owner.report.hits_rejected;
        ++rep.hits_rejected;
      }
      for (std::size_t k = 0; k < h.task_idx.size(); ++k) {
        const SimTask& st = tasks[h.task_idx[k]];
        if (accepts[k]) {
          ++owner.report.approved;
          ++rep.results_approved;
          for (const auto& res : st.state.results) {
            if (res.worker_id == owner.id) {
              update_price(pricing, res.duration);
              rep.price_trace.push_back(pricing.current_price);
              break;
            }
          }
        } else {
          ++owner.report.rejected;
          ++rep.results_rejected;
        }
      }
    }
  }

  // --- wrap-up ---------------------------------------------------------
  for (auto& h : hits)
    if (h.rec.status == HitStatus::Listed && !h.bound)
      h.rec.status = HitStatus::Disposed;

  rep.all_tasks_done = open_tasks == 0;
  rep.sim_time_end = now;
  rep.events = events;
  rep.hits_listed = static_cast<int>(hits.size());
  for (const auto& h : hits)
    if (h.rec.status == HitStatus::Disposed) ++rep.hits_disposed;

  for (auto& t : tasks) {
    TaskReport tr;
    tr.task_id = t.state.task_id;
    tr.media = t.state.media;
    tr.status = t.state.status;
    tr.results = static_cast<int>(t.state.results.size());
    tr.first_fusion_at = t.first_fusion_at;
    tr.max_parallel_relaunch = t.max_parallel_relaunch;
    tr.planted = t.truth.elements;
    tr.fused = t.state.fused;
    tr.fused_count = t.fused_count;
    ++rep.results_histogram[tr.results];
    rep.tasks.push_back(std::move(tr));
  }
  for (const auto& w : workers) rep.workers.push_back(w.report);

  if (job.category == Category::Tracking) {
    const VideoConfig& vc = *scenario.video;
    for (int v = 0; v < vc.num_videos; ++v) {
      VideoReport vr;
      vr.video = v;
      std::vector<ChunkTracks> chunks;
      for (int c = 0; c < vc.chunks_per_video; ++c) {
        const SimTask& st = tasks[v * vc.chunks_per_video + c];
        if (c == 0)
          vr.planted_tracks = static_cast<int>(st.truth.elements.size());
        ChunkTracks ct;
        ct.frame_begin = st.truth.frame_begin;
        ct.frame_end = st.truth.frame_end;
        if (st.state.fused)
          for (const auto& ce : st.state.fused->corroborated)
            ct.tracks.push_back(std::get<Track>(ce.element));
        chunks.push_back(std::move(ct));
      }
      vr.stitched = stitch_chunks(chunks, vc.overlap_frames);
      rep.videos.push_back(std::move(vr));
    }
  }
  return rep;
}

} // namespace crowdfuse

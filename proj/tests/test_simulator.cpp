#include <doctest.h>

#include <set>
#include <string>
#include <variant>
#include <vector>

#include "crowdfuse/geometry.hpp"
#include "crowdfuse/serialize.hpp"
#include "crowdfuse/simulator.hpp"

using namespace crowdfuse;

namespace {

Scenario classification_scenario(std::uint64_t seed, int tasks, int workers) {
  Scenario s;
  s.seed = seed;
  s.num_tasks = tasks;
  s.worker_count = workers;
  s.take_probability = 1.0;
  s.population.push_back({WorkerModel{}, 1.0});
  s.job.job_id = "unit";
  s.job.category = Category::ImageClassification;
  s.job.class_labels = {"cat", "dog", "fox", "owl"};
  s.job.params = default_params(Category::ImageClassification);
  s.job.batch_size = 2;
  return s;
}

} // namespace

TEST_CASE("task ids and counts") {
  Scenario s = classification_scenario(1, 12, 4);
  CHECK(scenario_task_count(s) == 12);
  CHECK(scenario_task_id(s, 0) == "t0000");
  CHECK(scenario_task_id(s, 11) == "t0011");

  Scenario v = s;
  v.job.category = Category::Tracking;
  v.video = VideoConfig{3, 2, 30, 5};
  CHECK(scenario_task_count(v) == 6);
  CHECK(scenario_task_id(v, 0) == "v00c00");
  CHECK(scenario_task_id(v, 3) == "v01c01");
}

TEST_CASE("scenes are a pure function of seed and index") {
  Scenario s = classification_scenario(99, 5, 3);
  s.job.category = Category::Detection;
  s.job.class_labels = {"car", "person"};
  s.job.params = default_params(Category::Detection);
  s.objects_min = 10;
  s.objects_max = 10;

  const SceneTruth once = generate_scene(s, 2);
  const SceneTruth twice = generate_scene(s, 2);
  REQUIRE(once.elements.size() == 10);
  REQUIRE(twice.elements.size() == 10);
  for (std::size_t i = 0; i < once.elements.size(); ++i) {
    const auto& a = std::get<LabeledBox>(once.elements[i]);
    const auto& b = std::get<LabeledBox>(twice.elements[i]);
    CHECK(a.label == b.label);
    CHECK(a.box.x_tl == b.box.x_tl);
    CHECK(a.box.y_br == b.box.y_br);
  }

  // Different indices give different scenes almost surely.
  const SceneTruth other = generate_scene(s, 3);
  bool any_diff = false;
  for (std::size_t i = 0; i < other.elements.size() && !any_diff; ++i)
    any_diff = std::get<LabeledBox>(other.elements[i]).box.x_tl !=
               std::get<LabeledBox>(once.elements[i]).box.x_tl;
  CHECK(any_diff);
}

TEST_CASE("planted boxes stay inside the frame and apart") {
  Scenario s = classification_scenario(4242, 8, 3);
  s.job.category = Category::Detection;
  s.job.class_labels = {"car"};
  s.objects_min = 6;
  s.objects_max = 10;
  s.crowding = false;

  for (int t = 0; t < 8; ++t) {
    const SceneTruth truth = generate_scene(s, t);
    std::vector<BoundingBox> boxes;
    for (const auto& e : truth.elements) {
      const auto& b = std::get<LabeledBox>(e).box;
      CHECK(b.x_tl >= 0);
      CHECK(b.y_tl >= 0);
      CHECK(b.x_br <= s.image_width);
      CHECK(b.y_br <= s.image_height);
      CHECK(b.area() > 0);
      boxes.push_back(b);
    }
    CHECK(boxes.size() >= 6);
    CHECK(boxes.size() <= 10);
    for (std::size_t i = 0; i < boxes.size(); ++i)
      for (std::size_t j = i + 1; j < boxes.size(); ++j)
        CHECK(iou_box(boxes[i], boxes[j]) < 0.3);
  }
}

TEST_CASE("worker models transform the truth as advertised") {
  Scenario s = classification_scenario(7, 3, 2);
  s.job.category = Category::Detection;
  s.job.class_labels = {"car", "person"};
  s.objects_min = 3;
  s.objects_max = 3;

  const SceneTruth truth = generate_scene(s, 0);

  WorkerModel perfect;
  Rng r1(100);
  const WorkerResult exact = worker_respond(perfect, "t0000", truth, s, r1);
  REQUIRE(exact.elements.size() == truth.elements.size());
  CHECK(exact.duration > 0);
  for (std::size_t i = 0; i < truth.elements.size(); ++i) {
    const auto& want = std::get<LabeledBox>(truth.elements[i]);
    const auto& got = std::get<LabeledBox>(exact.elements[i]);
    CHECK(got.label == want.label);
    CHECK(got.box.x_tl == want.box.x_tl);
  }

  // Zero-noise jitter degenerates to the perfect answer.
  WorkerModel still;
  still.kind = WorkerKind::Jittered;
  still.sigma = 0;
  still.label_flip = 0;
  Rng r2(100);
  const WorkerResult same = worker_respond(still, "t0000", truth, s, r2);
  REQUIRE(same.elements.size() == truth.elements.size());
  for (std::size_t i = 0; i < truth.elements.size(); ++i)
    CHECK(std::get<LabeledBox>(same.elements[i]).box.x_tl ==
          std::get<LabeledBox>(truth.elements[i]).box.x_tl);

  // A certain miss drops everything.
  WorkerModel lazy;
  lazy.kind = WorkerKind::Lazy;
  lazy.p_miss = 1.0;
  Rng r3(100);
  CHECK(worker_respond(lazy, "t0000", truth, s, r3).elements.empty());

  // Spammers invent boxes of the right shape for the category.
  WorkerModel spam;
  spam.kind = WorkerKind::Spammer;
  Rng r4(100);
  const WorkerResult junk = worker_respond(spam, "t0000", truth, s, r4);
  CHECK_FALSE(junk.elements.empty());
  for (const auto& e : junk.elements)
    CHECK(std::holds_alternative<LabeledBox>(e));
}

TEST_CASE("overcounters scale the count") {
  Scenario s = classification_scenario(7, 1, 1);
  s.job.category = Category::Counting;
  s.job.class_labels.clear();
  s.count_min = 40;
  s.count_max = 40;

  const SceneTruth truth = generate_scene(s, 0);
  const double planted = std::get<Count>(truth.elements.front()).value;
  CHECK(planted == doctest::Approx(40));

  WorkerModel over;
  over.kind = WorkerKind::Overcounter;
  over.count_bias = 0.25;
  Rng r(5);
  const WorkerResult biased = worker_respond(over, "t0000", truth, s, r);
  CHECK(std::get<Count>(biased.elements.front()).value ==
        doctest::Approx(planted * 1.25));
}

TEST_CASE("a perfect crowd settles every task at the solicitation floor") {
  Scenario s = classification_scenario(31, 16, 6);
  const SimulationReport rep = run_job(s);

  CHECK(rep.all_tasks_done);
  CHECK_FALSE(rep.budget_exhausted);
  REQUIRE(rep.tasks.size() == 16);
  for (const auto& t : rep.tasks) {
    CHECK(t.status == TaskStatus::Purged);
    CHECK(t.results == s.job.params.n_min);
    CHECK(t.first_fusion_at == s.job.params.n_min);
    CHECK(t.max_parallel_relaunch <= 1);
    REQUIRE(t.fused.has_value());
    REQUIRE(t.fused->corroborated.size() == 1);
    // Unanimous crowd: the fused label is the planted one.
    CHECK(std::get<ClassLabel>(t.fused->corroborated[0].element).value ==
          std::get<ClassLabel>(t.planted.front()).value);
  }
  CHECK(rep.results_rejected == 0);
  CHECK(rep.hits_rejected == 0);
  CHECK(rep.total_results == 16 * s.job.params.n_min);
}

TEST_CASE("reports are byte-stable across runs") {
  Scenario s = classification_scenario(77, 10, 5);
  const std::string a = report_to_json(run_job(s)).dump(2);
  const std::string b = report_to_json(run_job(s)).dump(2);
  CHECK(a == b);

  Scenario other = classification_scenario(78, 10, 5);
  CHECK(report_to_json(run_job(other)).dump(2) != a);
}

TEST_CASE("spam-only crowds burn the whole budget") {
  // Enough workers that the per-task budget, not the crowd, is the limit.
  Scenario s = classification_scenario(13, 6, 30);
  s.job.class_labels = {"c0", "c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9"};
  s.population.clear();
  WorkerModel spam;
  spam.kind = WorkerKind::Spammer;
  s.population.push_back({spam, 1.0});
  s.filtering = false; // keep the spammers coming

  const SimulationReport rep = run_job(s);
  CHECK(rep.all_tasks_done);
  int at_max = 0;
  for (const auto& t : rep.tasks) {
    CHECK(t.results <= s.job.params.n_max);
    if (t.results == s.job.params.n_max) ++at_max;
  }
  // Ten classes, beta 0.7: agreement among uniform votes is negligible.
  CHECK(at_max == 6);
}

TEST_CASE("a tiny step budget flags exhaustion") {
  Scenario s = classification_scenario(5, 30, 2);
  s.max_steps = 3;
  const SimulationReport rep = run_job(s);
  CHECK(rep.budget_exhausted);
  CHECK_FALSE(rep.all_tasks_done);
}

TEST_CASE("every result in the report traces to a served task") {
  Scenario s = classification_scenario(21, 9, 4);
  const SimulationReport rep = run_job(s);
  int total = 0;
  for (const auto& t : rep.tasks) total += t.results;
  CHECK(total == rep.total_results);
  int per_worker = 0;
  for (const auto& w : rep.workers) per_worker += w.results;
  CHECK(per_worker == rep.total_results);
  // The histogram partitions the tasks.
  int hist = 0;
  for (const auto& [count, tasks] : rep.results_histogram) {
    (void)count;
    hist += tasks;
  }
  CHECK(hist == static_cast<int>(rep.tasks.size()));
}

TEST_CASE("tracking runs stitch chunk consensus into whole videos") {
  Scenario s;
  s.seed = 321;
  s.worker_count = 8;
  s.take_probability = 1.0;
  s.objects_min = 1;
  s.objects_max = 3;
  s.population.push_back({WorkerModel{}, 1.0});
  s.video = VideoConfig{4, 2, 30, 5};
  s.job.job_id = "trk";
  s.job.category = Category::Tracking;
  s.job.class_labels = {"car"};
  s.job.params = default_params(Category::Tracking);
  s.job.batch_size = 1;

  const SimulationReport rep = run_job(s);
  CHECK(rep.all_tasks_done);
  REQUIRE(rep.videos.size() == 4);
  for (const auto& v : rep.videos) {
    CHECK(v.planted_tracks >= 1);
    CHECK(v.planted_tracks <= 3);
    CHECK(static_cast<int>(v.stitched.size()) == v.planted_tracks);
  }
}

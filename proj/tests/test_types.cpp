#include <doctest.h>

#include "crowdfuse/types.hpp"

using namespace crowdfuse;

TEST_CASE("category names round-trip") {
  const Category all[] = {Category::ImageClassification, Category::VideoClassification,
                          Category::Counting,            Category::Detection,
                          Category::Segmentation,        Category::Tracking};
  for (Category c : all) {
    auto back = category_from_string(to_string(c));
    REQUIRE(back.has_value());
    CHECK(*back == c);
  }
  CHECK_FALSE(category_from_string("pose_estimation").has_value());
  CHECK_FALSE(category_from_string("").has_value());
}

TEST_CASE("category family predicates") {
  CHECK(is_classification(Category::ImageClassification));
  CHECK(is_classification(Category::VideoClassification));
  CHECK_FALSE(is_classification(Category::Counting));
  CHECK_FALSE(is_classification(Category::Detection));

  CHECK(is_spatial(Category::Detection));
  CHECK(is_spatial(Category::Segmentation));
  CHECK(is_spatial(Category::Tracking));
  CHECK_FALSE(is_spatial(Category::Counting));
  CHECK_FALSE(is_spatial(Category::ImageClassification));
}

TEST_CASE("per-category parameter defaults") {
  const FusionParams cls = default_params(Category::ImageClassification);
  CHECK(cls.n_min == 3);
  CHECK(cls.n_max == 20);
  CHECK(cls.beta == doctest::Approx(0.7));

  const FusionParams det = default_params(Category::Detection);
  CHECK(det.n_min == 5);
  CHECK(det.n_corr == 3);
  CHECK(det.tau == doctest::Approx(15.0));
  CHECK(det.eta_cov == doctest::Approx(0.9));

  const FusionParams cnt = default_params(Category::Counting);
  CHECK(cnt.n_min == 10);
  CHECK(cnt.epsilon == doctest::Approx(0.1));

  // Segment and track clustering compare inverse-overlap distances, so the
  // radius is the inverse of the familiar 0.3 overlap bar.
  CHECK(default_params(Category::Segmentation).tau == doctest::Approx(1.0 / 0.3));
  CHECK(default_params(Category::Tracking).tau == doctest::Approx(1.0 / 0.3));
}

TEST_CASE("bounding box measures") {
  const BoundingBox b{10, 20, 40, 60};
  CHECK(b.width() == doctest::Approx(30));
  CHECK(b.height() == doctest::Approx(40));
  CHECK(b.area() == doctest::Approx(1200));
  CHECK(BoundingBox{5, 5, 5, 9}.area() == doctest::Approx(0));
}

TEST_CASE("segment construction sorts, dedups and validates") {
  Segment s = Segment::make(4, 3, "cat", {7, 2, 2, 0});
  CHECK(s.cells == std::vector<std::int64_t>{0, 2, 7});
  CHECK(s.width == 4);
  CHECK(s.height == 3);

  CHECK_THROWS_AS(Segment::make(0, 3, "x", {0}), Error);
  CHECK_THROWS_AS(Segment::make(4, 3, "x", {}), Error);
  CHECK_THROWS_AS(Segment::make(4, 3, "x", {12}), Error); // 4*3 cells: 0..11
  CHECK_THROWS_AS(Segment::make(4, 3, "x", {-1}), Error);
}

TEST_CASE("element kinds match their categories") {
  const AnnotationElement label{ClassLabel{"car"}};
  const AnnotationElement count{Count{7}};
  const AnnotationElement box{LabeledBox{{0, 0, 1, 1}, "car"}};
  const AnnotationElement seg{Segment::make(2, 2, "car", {0})};
  Track t;
  t.label = "car";
  t.frames[0] = {0, 0, 1, 1};
  const AnnotationElement trk{t};

  CHECK(element_matches_category(label, Category::ImageClassification));
  CHECK(element_matches_category(label, Category::VideoClassification));
  CHECK_FALSE(element_matches_category(label, Category::Counting));
  CHECK(element_matches_category(count, Category::Counting));
  CHECK(element_matches_category(box, Category::Detection));
  CHECK_FALSE(element_matches_category(box, Category::Segmentation));
  CHECK(element_matches_category(seg, Category::Segmentation));
  CHECK(element_matches_category(trk, Category::Tracking));
  CHECK_FALSE(element_matches_category(trk, Category::Detection));
}

TEST_CASE("approval rate needs history") {
  WorkerProfile p;
  p.worker_id = "w1";
  CHECK_FALSE(p.approval_rate("job").has_value());

  p.tallies["job"] = {0, 0};
  CHECK_FALSE(p.approval_rate("job").has_value());

  p.tallies["job"] = {3, 1};
  REQUIRE(p.approval_rate("job").has_value());
  CHECK(*p.approval_rate("job") == doctest::Approx(0.75));
  CHECK_FALSE(p.approval_rate("other").has_value());
}

TEST_CASE("job validation flags every violated rule") {
  JobSpec job;
  job.job_id = "j";
  job.category = Category::ImageClassification;
  job.class_labels = {"a", "b"};
  CHECK(validate_job(job).empty());

  job.class_labels.clear();
  auto issues = validate_job(job);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].find("EmptyLabelSet") == 0);

  job.category = Category::Counting;
  job.class_labels = {"a"};
  issues = validate_job(job);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].find("UnexpectedLabelSet") == 0);

  job.class_labels.clear();
  job.target_hourly_rate = 0;
  job.initial_hit_price = -1;
  job.batch_size = 0;
  job.payment_threshold = 1.5;
  issues = validate_job(job);
  CHECK(issues.size() == 4);

  JobSpec bad;
  bad.category = Category::Detection;
  bad.class_labels = {"car"};
  bad.params.n_min = 0;
  bad.params.n_max = -1;
  bad.params.n_corr = 0;
  bad.params.eta_cov = 2.0;
  bad.params.tau = -5;
  bad.params.beta = 0.0;
  bad.params.epsilon = 1.0;
  CHECK(validate_job(bad).size() == 7);
}

TEST_CASE("status names") {
  CHECK(std::string(to_string(TaskStatus::Open)) == "open");
  CHECK(std::string(to_string(TaskStatus::Aggregated)) == "aggregated");
  CHECK(std::string(to_string(TaskStatus::Purged)) == "purged");
  CHECK(std::string(to_string(HitStatus::Listed)) == "listed");
  CHECK(std::string(to_string(HitStatus::Disposed)) == "disposed");
}

#include <doctest.h>

#include <vector>

#include "crowdfuse/metrics.hpp"

using namespace crowdfuse;

namespace {

AnnotationElement box(double x0, double y0, double x1, double y1,
                      const std::string& label = "car") {
  return AnnotationElement(LabeledBox{{x0, y0, x1, y1}, label});
}

AnnotationElement label(const std::string& value) {
  return AnnotationElement(ClassLabel{value});
}

} // namespace

TEST_CASE("identical sets score perfectly") {
  std::vector<AnnotationElement> elems{box(0, 0, 10, 10), box(50, 50, 60, 60)};
  auto r = match_pr(elems, elems, Category::Detection, 0.5);
  CHECK(r.matched == 2);
  CHECK(r.precision() == doctest::Approx(1.0));
  CHECK(r.recall() == doctest::Approx(1.0));
}

TEST_CASE("a spurious box costs precision but not recall") {
  std::vector<AnnotationElement> reference;
  for (int i = 0; i < 9; ++i)
    reference.push_back(box(i * 30.0, 0, i * 30.0 + 20, 20));
  std::vector<AnnotationElement> fused = reference;
  fused.push_back(box(700, 700, 720, 720));

  auto r = match_pr(fused, reference, Category::Detection, 0.5);
  CHECK(r.matched == 9);
  CHECK(r.precision() == doctest::Approx(0.9));
  CHECK(r.recall() == doctest::Approx(1.0));
}

TEST_CASE("empty sides are vacuously perfect") {
  std::vector<AnnotationElement> reference{box(0, 0, 10, 10)};
  std::vector<AnnotationElement> none;

  auto r = match_pr(none, reference, Category::Detection, 0.5);
  CHECK(r.matched == 0);
  CHECK(r.precision() == doctest::Approx(1.0));
  CHECK(r.recall() == doctest::Approx(0.0));

  auto inverse = match_pr(reference, none, Category::Detection, 0.5);
  CHECK(inverse.precision() == doctest::Approx(0.0));
  CHECK(inverse.recall() == doctest::Approx(1.0));
}

TEST_CASE("matching is one-to-one, greedy by overlap") {
  // Two fused boxes both overlap the single reference; only the better one
  // may claim it.
  std::vector<AnnotationElement> fused{box(0, 0, 10, 10), box(1, 1, 11, 11)};
  std::vector<AnnotationElement> reference{box(1, 1, 11, 11)};
  auto r = match_pr(fused, reference, Category::Detection, 0.5);
  CHECK(r.matched == 1);
  CHECK(r.precision() == doctest::Approx(0.5));
  CHECK(r.recall() == doctest::Approx(1.0));
}

TEST_CASE("labels gate the match") {
  std::vector<AnnotationElement> fused{box(0, 0, 10, 10, "car")};
  std::vector<AnnotationElement> reference{box(0, 0, 10, 10, "person")};
  auto r = match_pr(fused, reference, Category::Detection, 0.5);
  CHECK(r.matched == 0);
}

TEST_CASE("the overlap must strictly beat the threshold") {
  // IoU exactly 0.5: 10x10 boxes overlapping on a 10x(20/3) strip would be
  // messy; use 100/200 via half-shifted congruent boxes.
  std::vector<AnnotationElement> fused{box(0, 0, 10, 20)};
  std::vector<AnnotationElement> reference{box(0, 10, 10, 30)};
  // inter 10x10 = 100, union 400 - 100 = 300 -> 1/3; use a threshold of 1/3.
  auto r = match_pr(fused, reference, Category::Detection, 1.0 / 3.0);
  CHECK(r.matched == 0);
  auto lower = match_pr(fused, reference, Category::Detection, 0.33);
  CHECK(lower.matched == 1);
}

TEST_CASE("classification fills a confusion matrix") {
  std::vector<AnnotationElement> fused{label("car")};
  std::vector<AnnotationElement> reference{label("car")};
  auto r = match_pr(fused, reference, Category::ImageClassification, 0.5);
  CHECK(r.matched == 1);
  CHECK(r.confusion.at("car").at("car") == 1);

  std::vector<AnnotationElement> wrong{label("van")};
  auto w = match_pr(wrong, reference, Category::ImageClassification, 0.5);
  CHECK(w.matched == 0);
  CHECK(w.confusion.at("car").at("van") == 1);

  // No output lands in the empty-string column.
  std::vector<AnnotationElement> none;
  auto n = match_pr(none, reference, Category::ImageClassification, 0.5);
  CHECK(n.confusion.at("car").at("") == 1);
}

TEST_CASE("counts have no match semantics") {
  std::vector<AnnotationElement> counts{AnnotationElement(Count{5})};
  CHECK_THROWS_AS(match_pr(counts, counts, Category::Counting, 0.5), Error);
  try {
    match_pr(counts, counts, Category::Counting, 0.5);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CategoryMismatch);
  }
}

TEST_CASE("mismatched element kinds are rejected") {
  std::vector<AnnotationElement> boxes{box(0, 0, 10, 10)};
  std::vector<AnnotationElement> labels{label("car")};
  CHECK_THROWS_AS(match_pr(labels, boxes, Category::Detection, 0.5), Error);
  CHECK_THROWS_AS(match_pr(boxes, labels, Category::Detection, 0.5), Error);
}

TEST_CASE("pooled reports add up") {
  std::vector<AnnotationElement> a{box(0, 0, 10, 10)};
  std::vector<AnnotationElement> b{box(0, 0, 10, 10), box(30, 30, 40, 40)};
  std::vector<MatchReport> parts{
      match_pr(a, a, Category::Detection, 0.5),
      match_pr(a, b, Category::Detection, 0.5),
  };
  auto pooled = combine_matches(parts);
  CHECK(pooled.matched == 2);
  CHECK(pooled.fused_total == 2);
  CHECK(pooled.reference_total == 3);
  CHECK(pooled.precision() == doctest::Approx(1.0));
  CHECK(pooled.recall() == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("average precision sweeps ten thresholds") {
  using Tasks = std::vector<TaskElements>;

  const Tasks perfect{{box(0, 0, 10, 10)}};
  CHECK(average_precision(perfect, perfect, Category::Detection) ==
        doctest::Approx(1.0));

  // Every fused box overlaps its reference at exactly 0.6: only the 0.50
  // and 0.55 rungs accept it, so the mean lands at 2/10.
  // inter 10x7.5 = 75, union 200 - 75 = 125, 75/125 = 0.6.
  const Tasks fused{{box(0, 0, 10, 10)}};
  const Tasks reference{{box(0, 2.5, 10, 12.5)}};
  CHECK(average_precision(fused, reference, Category::Detection) ==
        doctest::Approx(0.2));

  const Tasks far{{box(500, 500, 510, 510)}};
  CHECK(average_precision(fused, far, Category::Detection) == doctest::Approx(0.0));

  CHECK_THROWS_AS(
      average_precision(fused, reference, Category::ImageClassification), Error);

  const Tasks two_tasks{{box(0, 0, 10, 10)}, {box(0, 0, 10, 10)}};
  CHECK_THROWS_AS(average_precision(fused, two_tasks, Category::Detection), Error);
}

TEST_CASE("price convergence finds the settling point") {
  const double target = 0.08;

  std::vector<double> constant(10, target);
  auto idx = price_convergence(constant, target, 0.1);
  REQUIRE(idx.has_value());
  CHECK(*idx == 0);

  // Outside the band until index 149, inside from 150 on.
  std::vector<double> late;
  for (int i = 0; i < 150; ++i) late.push_back(target * 2);
  for (int i = 0; i < 100; ++i) late.push_back(target * 1.01);
  idx = price_convergence(late, target, 0.1);
  REQUIRE(idx.has_value());
  CHECK(*idx == 150);

  // A single excursion resets the clock.
  std::vector<double> blip(50, target);
  blip[40] = target * 5;
  idx = price_convergence(blip, target, 0.1);
  REQUIRE(idx.has_value());
  CHECK(*idx == 41);

  std::vector<double> oscillating;
  for (int i = 0; i < 100; ++i) oscillating.push_back(i % 2 ? target * 3 : target);
  CHECK_FALSE(price_convergence(oscillating, target, 0.1).has_value());

  CHECK_FALSE(price_convergence({}, target, 0.1).has_value());

  // Band edges are inclusive up to rounding slack.
  std::vector<double> edge(5, target * 1.1);
  CHECK(price_convergence(edge, target, 0.1).has_value());
}

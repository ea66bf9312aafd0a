#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

// Exercises the installed binary end to end. CROWDFUSE_BIN points at it;
// ctest sets the variable, a manual run must do the same.

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string binary() {
  const char* env = std::getenv("CROWDFUSE_BIN");
  REQUIRE_MESSAGE(env != nullptr, "CROWDFUSE_BIN must point at the cli binary");
  return env;
}

fs::path tmp_path(const std::string& name) {
  return fs::temp_directory_path() / ("crowdfuse_cli_" + name);
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
  REQUIRE(out.good());
}

void write_file(const fs::path& p, const json& j) { write_file(p, j.dump(2)); }

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run_cli(const std::string& args, const std::string& env_prefix = "") {
  const std::string cmd = env_prefix + "'" + binary() + "' " + args +
                          " > /dev/null 2> /dev/null";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

json label_element(const std::string& label) {
  return json{{"type", "label"}, {"label", label}};
}

json box_element(const std::string& label, double x0, double y0, double x1,
                 double y1) {
  return json{{"type", "box"}, {"label", label}, {"x_tl", x0},
              {"y_tl", y0},    {"x_br", x1},     {"y_br", y1}};
}

json result_entry(const std::string& worker, json elements) {
  return json{{"worker_id", worker}, {"duration", 30.0},
              {"elements", std::move(elements)}};
}

json classification_input() {
  json results = json::array();
  for (int i = 0; i < 5; ++i)
    results.push_back(result_entry("w" + std::to_string(i),
                                   json::array({label_element("car")})));
  results.push_back(result_entry("w5", json::array({label_element("van")})));
  results.push_back(result_entry("w6", json::array({label_element("van")})));
  json task = {{"task_id", "t0"}, {"results", results}};
  return json{{"category", "image_classification"},
              {"class_labels", {"car", "van", "bus"}},
              {"tasks", json::array({task})}};
}

json detection_input(int tasks, int workers) {
  json task_list = json::array();
  for (int t = 0; t < tasks; ++t) {
    json results = json::array();
    for (int w = 0; w < workers; ++w) {
      // Same two objects per task, each worker one pixel off.
      json elems = json::array(
          {box_element("car", 100 + 10 * t + w, 50, 180 + 10 * t + w, 110),
           box_element("person", 400 + w, 200 + t, 430 + w, 280 + t)});
      results.push_back(result_entry("w" + std::to_string(w), elems));
    }
    task_list.push_back(
        json{{"task_id", "t" + std::to_string(t)}, {"results", results}});
  }
  return json{{"category", "detection"}, {"tasks", task_list}};
}

json simulate_scenario(std::uint64_t seed) {
  return json{{"seed", seed},
              {"category", "image_classification"},
              {"num_tasks", 6},
              {"workers", 4},
              {"class_labels", {"a", "b", "c"}},
              {"take_probability", 1.0},
              {"filtering", false},
              {"population", json::array({json{{"kind", "perfect"},
                                               {"fraction", 1.0}}})},
              {"job", json{{"job_id", "cli-sim"}, {"batch_size", 1}}}};
}

} // namespace

TEST_CASE("fuse reads an annotation set and emits consensus") {
  const fs::path in = tmp_path("fuse_in.json");
  const fs::path out = tmp_path("fuse_out.json");
  write_file(in, classification_input());

  CHECK(run_cli("fuse " + in.string() + " -o " + out.string()) == 0);

  const json result = json::parse(read_file(out));
  CHECK(result.at("kind") == "fusion_output");
  CHECK(result.at("category") == "image_classification");
  REQUIRE(result.at("tasks").size() == 1);
  const json& fused = result.at("tasks")[0].at("fused");
  REQUIRE_FALSE(fused.is_null());
  // 5 of 7 votes beats the default 0.7 bar.
  REQUIRE(fused.at("corroborated").size() == 1);
  CHECK(fused.at("corroborated")[0].at("element").at("label") == "car");
  CHECK(fused.at("corroborated")[0].at("support") == 5);
}

TEST_CASE("malformed json exits with the schema code") {
  const fs::path in = tmp_path("broken.json");
  write_file(in, std::string("{ this is not json"));
  CHECK(run_cli("fuse " + in.string()) == 2);
}

TEST_CASE("a missing input file is a schema failure") {
  CHECK(run_cli("fuse " + tmp_path("does_not_exist.json").string()) == 2);
}

TEST_CASE("parameter flags must fit the category") {
  const fs::path in = tmp_path("flagged.json");
  write_file(in, classification_input());
  // Counting tolerance makes no sense for classification.
  CHECK(run_cli("fuse " + in.string() + " --epsilon 0.1") == 3);
  CHECK(run_cli("fuse " + in.string() + " --tau 12") == 3);
  CHECK(run_cli("fuse " + in.string() + " --threads 0") == 3);
}

TEST_CASE("thread count never changes the output bytes") {
  const fs::path in = tmp_path("threads_in.json");
  const fs::path one = tmp_path("threads_one.json");
  const fs::path four = tmp_path("threads_four.json");
  write_file(in, detection_input(9, 5));

  CHECK(run_cli("fuse " + in.string() + " --threads 1 -o " + one.string()) == 0);
  CHECK(run_cli("fuse " + in.string() + " --threads 4 -o " + four.string()) == 0);
  CHECK(read_file(one) == read_file(four));

  const json result = json::parse(read_file(one));
  REQUIRE(result.at("tasks").size() == 9);
  for (const auto& t : result.at("tasks"))
    CHECK(t.at("fused").at("corroborated").size() == 2);
}

TEST_CASE("simulate writes the same report for the same scenario") {
  const fs::path sc = tmp_path("sim_scenario.json");
  const fs::path r1 = tmp_path("sim_r1.json");
  const fs::path r2 = tmp_path("sim_r2.json");
  write_file(sc, simulate_scenario(2024));

  CHECK(run_cli("simulate " + sc.string() + " -o " + r1.string()) == 0);
  CHECK(run_cli("simulate " + sc.string() + " -o " + r2.string()) == 0);
  CHECK(read_file(r1) == read_file(r2));

  const json report = json::parse(read_file(r1));
  CHECK(report.at("kind") == "simulation_report");
  CHECK(report.at("all_tasks_done") == true);
  CHECK(report.at("seed") == 2024);
}

TEST_CASE("a scenario without a seed is rejected") {
  json sc = simulate_scenario(1);
  sc.erase("seed");
  const fs::path p = tmp_path("sim_noseed.json");
  write_file(p, sc);
  CHECK(run_cli("simulate " + p.string()) == 2);
}

TEST_CASE("the seed env var overrides the scenario") {
  const fs::path sc = tmp_path("sim_env.json");
  const fs::path out = tmp_path("sim_env_out.json");
  write_file(sc, simulate_scenario(2024));

  CHECK(run_cli("simulate " + sc.string() + " -o " + out.string(),
                "CROWDFUSE_SEED=999 ") == 0);
  const json report = json::parse(read_file(out));
  CHECK(report.at("seed") == 999);

  CHECK(run_cli("simulate " + sc.string() + " -o " + out.string(),
                "CROWDFUSE_SEED=bogus ") == 3);
}

TEST_CASE("evaluate scores a report against its planted truth") {
  const fs::path sc = tmp_path("eval_scenario.json");
  const fs::path rep = tmp_path("eval_report.json");
  const fs::path ev = tmp_path("eval_out.json");
  write_file(sc, simulate_scenario(606));

  REQUIRE(run_cli("simulate " + sc.string() + " -o " + rep.string()) == 0);
  // Fused side reads 'fused', reference side prefers 'planted'.
  CHECK(run_cli("evaluate " + rep.string() + " " + rep.string() + " -o " +
                ev.string()) == 0);

  const json scored = json::parse(read_file(ev));
  CHECK(scored.at("kind") == "evaluation");
  CHECK(scored.at("tasks") == 6);
  // Perfect crowd: every fused label matches the planted one.
  CHECK(scored.at("precision") == 1.0);
  CHECK(scored.at("recall") == 1.0);
  CHECK(scored.at("confusion").size() >= 1);
}

TEST_CASE("evaluate accepts a hand written reference") {
  const fs::path fused = tmp_path("ref_fused.json");
  const fs::path ref = tmp_path("ref_truth.json");
  const fs::path out = tmp_path("ref_eval.json");

  json fused_doc = {
      {"category", "detection"},
      {"tasks", json::array({json{
                    {"task_id", "t0"},
                    {"fused",
                     json{{"corroborated",
                           json::array({json{
                               {"element", box_element("car", 0, 0, 10, 10)},
                               {"support", 3}}})},
                          {"uncorroborated_groups", 0},
                          {"coverage", 1.0},
                          {"per_worker_accept", json::object()}}}}})}};
  json ref_doc = {
      {"category", "detection"},
      {"tasks",
       json::array({json{{"task_id", "t0"},
                         {"elements", json::array({box_element("car", 1, 1, 11, 11),
                                                   box_element("car", 500, 500,
                                                               520, 520)})}}})}};
  write_file(fused, fused_doc);
  write_file(ref, ref_doc);

  CHECK(run_cli("evaluate " + fused.string() + " " + ref.string() + " -o " +
                out.string()) == 0);
  const json scored = json::parse(read_file(out));
  // 81/119 overlap beats the default 0.5 bar; the far box goes unmatched.
  CHECK(scored.at("matched") == 1);
  CHECK(scored.at("precision") == 1.0);
  CHECK(scored.at("recall") == 0.5);

  // The same pair misses a strict 0.75 bar.
  CHECK(run_cli("evaluate " + fused.string() + " " + ref.string() +
                " --iou 0.75 -o " + out.string()) == 0);
  CHECK(json::parse(read_file(out)).at("matched") == 0);

  CHECK(run_cli("evaluate " + fused.string() + " " + ref.string() +
                " --iou 1.0") == 3);
}

TEST_CASE("average precision needs boxes") {
  const fs::path sc = tmp_path("ap_scenario.json");
  const fs::path rep = tmp_path("ap_report.json");
  write_file(sc, simulate_scenario(7));
  REQUIRE(run_cli("simulate " + sc.string() + " -o " + rep.string()) == 0);
  CHECK(run_cli("evaluate " + rep.string() + " " + rep.string() + " --ap") == 3);
}

TEST_CASE("counting output has no overlap score") {
  json sc = simulate_scenario(11);
  sc["category"] = "counting";
  sc.erase("class_labels");
  sc["count_min"] = 5;
  sc["count_max"] = 15;
  const fs::path scp = tmp_path("count_scenario.json");
  const fs::path rep = tmp_path("count_report.json");
  write_file(scp, sc);
  REQUIRE(run_cli("simulate " + scp.string() + " -o " + rep.string()) == 0);
  CHECK(run_cli("evaluate " + rep.string() + " " + rep.string()) == 3);
}

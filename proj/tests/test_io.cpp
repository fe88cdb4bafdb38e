#include "doctest.h"
#include "helpers.hpp"
#include "ssvs/error.hpp"
#include "ssvs/io.hpp"

#include <filesystem>
#include <string>

using namespace ssvs;
namespace fs = std::filesystem;

namespace {

const char* kMinimalSpec = R"js({
  "family": "poisson",
  "response": "y",
  "fixed_effects": ["(Intercept)", "x"],
  "random_blocks": [{"name": "site", "group": "site", "effects": ["(Intercept)"]}]
})js";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ssvs_io_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("csv parsing handles quotes, CRLF and BOM") {
  const auto t = io::parse_csv("\xEF\xBB\xBF" "a,\"b,c\",d\r\n1,\"he said \"\"hi\"\"\",3\r\n");
  CHECK(t.header == std::vector<std::string>{"a", "b,c", "d"});
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][1] == "he said \"hi\"");
  CHECK(t.column("d") == 2);
  CHECK(t.column("zz") == -1);
  CHECK_THROWS_AS(io::parse_csv(""), ParseError);
  CHECK_THROWS_AS(io::parse_csv("a,b\n1,2,3\n"), ParseError);
}

TEST_CASE("two-row csv loads into a dataset") {
  const auto spec = io::parse_spec_text(kMinimalSpec);
  const auto t = io::parse_csv("y,x,site\n3,0.5,siteA\n0,-1.25,siteB\n");
  const auto d = io::dataset_from_csv(t, spec, {});
  CHECK(d.size() == 2);
  CHECK(d.y == std::vector<double>{3.0, 0.0});
  CHECK(d.x(0, 0) == 1.0);
  CHECK(d.x(1, 1) == -1.25);
  CHECK(d.blocks[0].group == std::vector<int>{0, 1});
  CHECK(d.blocks[0].group_labels == std::vector<std::string>{"siteA", "siteB"});
}

TEST_CASE("group labels map by first appearance") {
  const auto spec = io::parse_spec_text(kMinimalSpec);
  const auto t = io::parse_csv("y,x,site\n1,0,siteB\n1,0,siteA\n2,0,siteB\n");
  const auto d = io::dataset_from_csv(t, spec, {});
  CHECK(d.blocks[0].group == std::vector<int>{0, 1, 0});
  CHECK(d.blocks[0].group_labels[0] == "siteB");
}

TEST_CASE("load errors name the column and row") {
  const auto spec = io::parse_spec_text(kMinimalSpec);
  try {
    io::dataset_from_csv(io::parse_csv("x,site\n1,a\n"), spec, {});
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("y") != std::string::npos);
  }
  try {
    io::dataset_from_csv(io::parse_csv("y,x,site\n1,0,a\n2,abc,b\n"), spec, {});
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("x") != std::string::npos);
    CHECK(msg.find("3") != std::string::npos);
  }
  CHECK_THROWS_AS(io::dataset_from_csv(io::parse_csv("y,x,site\n1.5,0,a\n"), spec, {}), ParseError);
}

TEST_CASE("squared columns on request") {
  auto spec = io::parse_spec_text(kMinimalSpec);
  spec.fixed_effects.push_back("x^2");
  const auto t = io::parse_csv("y,x,site\n1,3,a\n");
  CHECK_THROWS_AS(io::dataset_from_csv(t, spec, {}), ParseError);
  const auto d = io::dataset_from_csv(t, spec, io::LoadOptions{true});
  CHECK(d.x(0, 2) == 9.0);
}

TEST_CASE("minimal spec gets the documented defaults") {
  const auto spec = io::parse_spec_text(kMinimalSpec);
  CHECK(spec.family.kind == FamilyKind::poisson);
  CHECK(spec.family.link == Link::log);
  CHECK(spec.hyper.h == 1.0);
  CHECK(spec.hyper.v == 0.01);
  CHECK(spec.hyper.nu == 0.01);
  CHECK(spec.sampler.chains == 3);
  CHECK(spec.sampler.adapt == 1000);
  CHECK(spec.sampler.burn_in == 1000);
  CHECK(spec.sampler.kept == 3000);
  CHECK(spec.mode == SelectionMode::ssvs_full);
  REQUIRE(spec.random_blocks.size() == 1);
  CHECK(spec.random_blocks[0].effects == std::vector<std::string>{"(Intercept)"});
}

TEST_CASE("invalid specs are rejected with every problem listed") {
  CHECK_THROWS_AS(io::parse_spec_text(R"js({"family": "poisson", "response": "y", "fixed_effects": ["x"],
                                          "hyper": {"h": -1}})js"),
                  ConfigError);
  CHECK_THROWS(io::parse_spec_text(R"js({"family": "gamma", "response": "y", "fixed_effects": ["x"]})js"));
  CHECK_THROWS(io::parse_spec_text(R"js({"family": "poisson", "response": "y", "fixed_effects": ["x"], "colour": 1})js"));
  try {
    io::parse_spec_text(R"js({"family": "poisson", "response": "y", "fixed_effects": ["x", "x"],
                            "hyper": {"h": -1}})js");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("h") != std::string::npos);
    CHECK(msg.find("duplicate") != std::string::npos);
  }
}

TEST_CASE("two random blocks") {
  const auto spec = io::parse_spec_text(R"js({
    "family": "negative_binomial", "dispersion": 2.0, "response": "count",
    "fixed_effects": ["(Intercept)", "depth"],
    "random_blocks": [
      {"name": "site", "group": "site", "effects": ["(Intercept)", "depth"]},
      {"name": "species", "group": "species", "effects": ["(Intercept)"]}
    ]})js");
  REQUIRE(spec.random_blocks.size() == 2);
  CHECK(spec.random_blocks[1].name == "species");
  CHECK(spec.family.dispersion == 2.0);
}

TEST_CASE("spec round trip") {
  auto spec = io::parse_spec_text(kMinimalSpec);
  spec.hyper.h = 0.1;
  spec.hyper.xi_scale_is_variance = false;
  spec.sampler.seed = 123456789012345ULL;
  spec.sampler.init = InitMode::warm;
  spec.mode = SelectionMode::ssvs_diagonal;
  spec.offset = "logt";
  const auto back = io::spec_from_json(io::spec_to_json(spec));
  CHECK(io::spec_to_json(back) == io::spec_to_json(spec));
  CHECK(back.sampler.seed == 123456789012345ULL);
  CHECK(back.offset == spec.offset);
  CHECK(back.hyper.h == 0.1);
}

TEST_CASE("design json round trip") {
  auto d = SimDesign::scaled_case(2);
  d.seed = 77;
  const auto back = io::design_from_json(io::design_to_json(d));
  CHECK(back.case_id == 2);
  CHECK(back.seed == 77);
  CHECK(back.omega == d.omega);
  CHECK(back.subjects == d.subjects);
  const auto preset = io::design_from_json(nlohmann::json::parse(R"js({"preset": "scaled", "case": 1, "replicates": 3})js"));
  CHECK(preset.replicates == 3);
  CHECK(preset.fixed == 6);
}

TEST_CASE("trace round trip is exact") {
  auto p = testing::make_problem(FamilyKind::negative_binomial, 4, 3, 3, 2, 91);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.adapt = 10;
  cfg.burn_in = 10;
  cfg.kept = 15;
  cfg.threads = 1;
  const Trace t = run_chains(p.spec, p.data, cfg);
  const auto dir = scratch("trace");
  io::write_trace(dir, t);
  const Trace back = io::read_trace(dir);
  REQUIRE(back.chains.size() == 2);
  CHECK(back.layout.fixed == t.layout.fixed);
  for (std::size_t c = 0; c < 2; ++c) {
    REQUIRE(back.chains[c].draws.size() == 15);
    CHECK(back.chains[c].seed == t.chains[c].seed);
    CHECK(io::chain_csv(back.chains[c], back.layout) == io::chain_csv(t.chains[c], t.layout));
    for (std::size_t i = 0; i < 15; ++i) {
      const auto& a = t.chains[c].draws[i];
      const auto& b = back.chains[c].draws[i];
      CHECK(a.beta == b.beta);
      CHECK(a.log_posterior == b.log_posterior);
      CHECK(a.dispersion == b.dispersion);
      CHECK(a.blocks[0].omega == b.blocks[0].omega);
      CHECK(a.blocks[0].effects == b.blocks[0].effects);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("trace columns are stable") {
  auto p = testing::make_problem(FamilyKind::poisson, 2, 2, 2, 2, 92);
  const auto cols = io::trace_columns(TraceLayout::of(p.spec, p.data));
  CHECK(cols[0] == "iteration");
  CHECK(cols[1] == "log_posterior");
  CHECK(cols[2] == "beta:(Intercept)");
  CHECK(std::find(cols.begin(), cols.end(), "omega:g:2:1") != cols.end());
}

TEST_CASE("atomic writes leave no temporary files") {
  const auto dir = scratch("atomic");
  io::write_file_atomic(dir / "a.csv", "x\n1\n");
  io::write_file_atomic(dir / "a.csv", "x\n2\n");
  CHECK(io::read_file(dir / "a.csv") == "x\n2\n");
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    (void)e;
    ++files;
  }
  CHECK(files == 1);
  CHECK_THROWS_AS(io::read_file(dir / "missing.csv"), ParseError);
  fs::remove_all(dir);
}

TEST_CASE("dataset csv round trip") {
  const auto sim = simulate_dataset(SimDesign::scaled_case(1), 0);
  const auto spec = design_spec(SimDesign::scaled_case(1), {}, {}, SelectionMode::ssvs_full);
  const auto back = io::dataset_from_csv(io::parse_csv(io::dataset_csv(sim.data)), spec, {});
  CHECK(back.y == sim.data.y);
  CHECK(back.x == sim.data.x);
  CHECK(back.blocks[0].group == sim.data.blocks[0].group);
}

}

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>

#include "doctest.h"
#include "nested_iv/nested_iv.h"

namespace fs = std::filesystem;

namespace {

fs::path write_units(int per_arm, unsigned seed) {
  fs::path p = fs::temp_directory_path() / ("niv_c_api_" + std::to_string(seed) + ".csv");
  std::ofstream out(p);
  out << "unit_id,z,d,r,age,sex\n";
  std::mt19937 gen(seed);
  std::uniform_int_distribution<int> age(55, 74);
  std::bernoulli_distribution coin(0.5);
  const char* arms[4] = {"1a", "0a", "1b", "0b"};
  for (int a = 0; a < 4; ++a)
    for (int i = 0; i < per_arm; ++i)
      out << "u" << a << "_" << i << "," << arms[a] << "," << (a % 2 == 0 && coin(gen)) << ","
          << coin(gen) << "," << age(gen) << "," << (coin(gen) ? "F" : "M") << "\n";
  return p;
}

}  // namespace

TEST_CASE("C API: status strings") {
  CHECK(std::string(niv_version()).size() > 0);
  CHECK(std::string(niv_status_name(NIV_MISSING_COLUMN)) == "MissingColumn");
  CHECK(std::string(niv_status_name(NIV_OK)) == "Ok");
  CHECK(std::string(niv_rng_name()).size() > 0);
}

TEST_CASE("C API: load, match, estimate") {
  auto path = write_units(12, 1);
  niv_dataset_t data = nullptr;
  REQUIRE(niv_dataset_load(path.c_str(), &data) == NIV_OK);
  size_t n = 0;
  CHECK(niv_dataset_size(data, &n) == NIV_OK);
  CHECK(n == 48);

  niv_match_options_t opts;
  niv_match_options_default(&opts);
  niv_design_t design = nullptr;
  REQUIRE(niv_match(data, &opts, &design) == NIV_OK);
  int strata = 0;
  CHECK(niv_design_size(design, &strata) == NIV_OK);
  CHECK(strata == 12);

  niv_table_t rows = nullptr;
  REQUIRE(niv_design_table(design, &rows) == NIV_OK);
  size_t r = 0, c = 0;
  CHECK(niv_table_shape(rows, &r, &c) == NIV_OK);
  CHECK(r == 48);
  CHECK(c == 4);
  const char* name = nullptr;
  CHECK(niv_table_header(rows, 3, &name) == NIV_OK);
  CHECK(std::string(name) == "unit_id");
  CHECK(niv_table_cell(rows, 99, 0, &name) == NIV_INVALID_ARGUMENT);
  niv_table_destroy(rows);

  niv_estimate_t est;
  CHECK(niv_estimate(design, NIV_TARGET_PROPORTION, 0.95, NIV_TWO_SIDED, 0.0, &est) == NIV_OK);
  CHECK(est.lower <= est.point);
  CHECK(est.point <= est.upper);
  CHECK(est.method == NIV_METHOD_CLOSED_FORM);

  niv_table_t bal = nullptr;
  CHECK(niv_balance(design, data, &bal) == NIV_OK);
  CHECK(niv_table_shape(bal, &r, &c) == NIV_OK);
  CHECK(r >= 2);
  niv_table_destroy(bal);

  auto saved = fs::temp_directory_path() / "niv_c_api_design.csv";
  CHECK(niv_design_save(design, saved.c_str()) == NIV_OK);
  niv_design_t again = nullptr;
  CHECK(niv_design_load(saved.c_str(), data, &again) == NIV_OK);
  niv_estimate_t est2;
  CHECK(niv_estimate(again, NIV_TARGET_PROPORTION, 0.95, NIV_TWO_SIDED, 0.0, &est2) == NIV_OK);
  CHECK(est2.point == est.point);
  niv_design_destroy(again);

  double gammas[] = {1.0, 1.5};
  niv_table_t sens = nullptr;
  double cp = 0;
  int has_cp = 0;
  niv_status_t st = niv_sensitivity(design, NIV_TARGET_SW, 0.0, gammas, 2, 0.95, NIV_GREATER, &sens, &cp, &has_cp);
  CHECK((st == NIV_OK || st == NIV_UNDEFINED_ESTIMAND));
  if (st == NIV_OK) niv_table_destroy(sens);

  niv_design_destroy(design);
  niv_dataset_destroy(data);
  fs::remove(path);
  fs::remove(saved);
}

TEST_CASE("C API: errors carry a message") {
  niv_dataset_t data = nullptr;
  CHECK(niv_dataset_load("/nonexistent/units.csv", &data) == NIV_IO);
  CHECK(std::string(niv_last_error()).size() > 0);
  CHECK(niv_dataset_load(nullptr, &data) == NIV_INVALID_ARGUMENT);
  CHECK(niv_design_size(nullptr, nullptr) == NIV_INVALID_ARGUMENT);
  CHECK(niv_simulate_preset("nope", 1, 1, 1, nullptr) != NIV_OK);
}

TEST_CASE("C API: simulation and oracle") {
  niv_experiment_t cfg;
  niv_experiment_default(&cfg);
  cfg.n_strata = 40;
  cfg.reps = 8;
  cfg.mu = 1.0;
  niv_table_t t1 = nullptr, t2 = nullptr;
  REQUIRE(niv_simulate(&cfg, 1, 42, 1, &t1) == NIV_OK);
  REQUIRE(niv_simulate(&cfg, 1, 42, 2, &t2) == NIV_OK);
  const char *csv1 = nullptr, *csv2 = nullptr;
  niv_table_csv(t1, &csv1);
  niv_table_csv(t2, &csv2);
  CHECK(std::string(csv1) == std::string(csv2));
  niv_table_destroy(t1);
  niv_table_destroy(t2);

  cfg.n_strata = 3;
  niv_oracle_t o;
  REQUIRE(niv_oracle(&cfg, 7, 0, 0.0, &o) == NIV_OK);
  CHECK(o.assignments == 512);
  CHECK(std::fabs(o.mean - o.truth) <= 1e-12);
  CHECK(std::fabs(o.mean - o.expected) <= 1e-12);
  cfg.n_strata = 7;
  CHECK(niv_oracle(&cfg, 7, 0, 0.0, &o) == NIV_TOO_LARGE_FOR_ENUMERATION);
  CHECK(std::string(niv_preset_names()).find("table2") != std::string::npos);
}

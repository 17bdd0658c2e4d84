#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "tmle/csv.hpp"
#include "tmle/dataset.hpp"
#include "tmle/errors.hpp"

using namespace tmle;

namespace {

csv::Table parse(const std::string& text) {
  std::istringstream in(text);
  return csv::read(in);
}

}  // namespace

TEST_CASE("reads a numeric table") {
  const auto t = parse("W,A,Y\n0,0,0.25\n1,1,1e-3\n");
  CHECK(t.header == std::vector<std::string>{"W", "A", "Y"});
  CHECK(t.rows() == 2);
  CHECK(t.column("Y")[1] == 1e-3);
}

TEST_CASE("tolerates CRLF, a BOM and surrounding spaces") {
  const auto t = parse("\xEF\xBB\xBFW , Y\r\n 1 , 2.5\r\n");
  CHECK(t.header == std::vector<std::string>{"W", "Y"});
  CHECK(t.column("Y")[0] == 2.5);
}

TEST_CASE("rejects malformed input") {
  CHECK_THROWS_AS(parse(""), InputError);
  CHECK_THROWS_AS(parse("W,W\n1,2\n"), InputError);
  CHECK_THROWS_AS(parse("W,Y\n1\n"), InputError);
  CHECK_THROWS_AS(parse("W,Y\n1,\n"), InputError);
  CHECK_THROWS_AS(parse("W,Y\n1,NA\n"), InputError);
  CHECK_THROWS_AS(parse("W,Y\n1,nan\n"), InputError);
  CHECK_THROWS_AS(parse("W,Y\n1,2,3\n"), InputError);
  CHECK_THROWS_AS(parse("W,Y\n1,1,5\n"), InputError);
  CHECK_THROWS_AS(parse("W,Y\n1,0\n").column("Z"), InputError);
}

TEST_CASE("write then read round-trips exactly") {
  csv::Table t;
  t.header = {"a", "b"};
  t.columns = {{0.1, 1.0 / 3.0, -2e-300}, {1e20, 0.0, 123456789.125}};
  std::ostringstream out;
  csv::write(out, t);
  const auto back = parse(out.str());
  CHECK(back.header == t.header);
  CHECK(back.columns == t.columns);
}

TEST_CASE("dataset loading") {
  SUBCASE("default roles use every other column as a covariate") {
    const auto d = dataset_from_table(parse("W1,A,W2,Y\n0,0,1,0.5\n1,1,0,0.2\n0,1,1,0.1\n"), {});
    CHECK(d.covariate_names == std::vector<std::string>{"W1", "W2"});
    CHECK(d.size() == 3);
    CHECK(d.outcome_bounds().lo == 0.1);
    CHECK(d.outcome_bounds().hi == 0.5);
  }
  SUBCASE("missing column") {
    CHECK_THROWS_AS(dataset_from_table(parse("W,Y\n0,1\n1,0\n"), {}), InputError);
  }
  SUBCASE("non-binary treatment") {
    CHECK_THROWS_AS(dataset_from_table(parse("W,A,Y\n0,2,1\n1,0,0\n"), {}), InputError);
  }
  SUBCASE("outcome outside declared bounds") {
    CHECK_THROWS_AS(dataset_from_table(parse("W,A,Y\n0,0,1\n1,0,3\n"), {}, OutcomeBounds{0, 2}), InputError);
  }
  SUBCASE("everyone treated") {
    CHECK_THROWS(dataset_from_table(parse("W,A,Y\n0,1,1\n1,1,0\n"), {}));
  }
  SUBCASE("longitudinal roles by prefix") {
    const auto d = long_dataset_from_table(
        parse("W0,A0,W1,A1,Y\n0,0,1,0,1\n1,0,0,0,0\n1,1,0,1,1\n0,0,1,1,0\n"), {});
    CHECK(d.baseline_names == std::vector<std::string>{"W0"});
    CHECK(d.time1_names == std::vector<std::string>{"W1"});
    CHECK(d.history_names() == std::vector<std::string>{"W0", "W1"});
    const auto t = to_table(d);
    CHECK(t.header == std::vector<std::string>{"W0", "A0", "W1", "A1", "Y"});
  }
}

TEST_CASE("dataset to table and back") {
  std::mt19937_64 rng(1);
  const auto d = support::random_point(rng, 30, false);
  std::ostringstream out;
  csv::write(out, to_table(d));
  const auto back = dataset_from_table(parse(out.str()), {});
  CHECK(back.covariates == d.covariates);
  CHECK(back.treatment == d.treatment);
  CHECK(back.outcome == d.outcome);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qhmm/errors.hpp"
#include "qhmm/panel.hpp"

using namespace qhmm;

namespace {

PanelRecord rec(const std::string& unit, int t, double y,
                std::vector<double> x = {1.0, 2.0}) {
  PanelRecord r;
  r.unit_id = unit;
  r.time = t;
  r.y = y;
  r.x = std::move(x);
  r.z = {0.5};
  r.w = {1.0};
  return r;
}

}  // namespace

TEST_CASE("consecutive occasions are accepted and indexed densely") {
  std::vector<PanelRecord> records = {rec("A", 1, 0.1), rec("A", 2, 0.2),
                                      rec("A", 3, 0.3), rec("B", 1, 1.0)};
  PanelDataset ds = validate_dataset(records);
  CHECK(ds.n_units() == 2);
  CHECK(ds.T(0) == 3);
  CHECK(ds.T(1) == 1);
  CHECK(ds.n_obs() == 4);
  CHECK(ds.y(ds.obs_index(0, 2)) == 0.2);
  CHECK(ds.unit_id(0) == "A");
  CHECK(ds.p() == 2);
  CHECK(ds.r() == 1);
  CHECK(ds.d() == 1);
}

TEST_CASE("rows arriving out of time order are sorted per unit") {
  std::vector<PanelRecord> records = {rec("A", 2, 0.2), rec("A", 1, 0.1)};
  PanelDataset ds = validate_dataset(records);
  CHECK(ds.y(ds.obs_index(0, 1)) == 0.1);
  CHECK(ds.y(ds.obs_index(0, 2)) == 0.2);
}

TEST_CASE("a gap in occasions raises NonMonotoneDropout") {
  std::vector<PanelRecord> records = {rec("B", 1, 0.1), rec("B", 3, 0.3)};
  CHECK_THROWS_WITH_AS(validate_dataset(records),
                       doctest::Contains("not consecutive"), Error);
  try {
    validate_dataset(records);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonMonotoneDropout);
  }
}

TEST_CASE("occasions must start at 1") {
  std::vector<PanelRecord> records = {rec("B", 2, 0.1), rec("B", 3, 0.3)};
  CHECK_THROWS_AS(validate_dataset(records), Error);
}

TEST_CASE("mixed covariate dimensions raise DimensionMismatch") {
  std::vector<PanelRecord> records = {rec("A", 1, 0.1, {1.0, 2.0}),
                                      rec("B", 1, 0.2, {1.0, 2.0, 3.0})};
  try {
    validate_dataset(records);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("non-finite values are rejected") {
  std::vector<PanelRecord> records = {rec("A", 1, std::nan(""))};
  try {
    validate_dataset(records);
    FAIL("expected NonFiniteValue");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteValue);
  }
}

TEST_CASE("resample_units keeps full sequences and supports repetition") {
  std::vector<PanelRecord> records = {rec("A", 1, 0.1), rec("A", 2, 0.2),
                                      rec("B", 1, 1.0)};
  PanelDataset ds = validate_dataset(records);
  PanelDataset rs = ds.resample_units({1, 0, 0});
  CHECK(rs.n_units() == 3);
  CHECK(rs.T(0) == 1);
  CHECK(rs.T(1) == 2);
  CHECK(rs.T(2) == 2);
  CHECK(rs.y(rs.obs_index(0, 1)) == 1.0);
  CHECK(rs.y(rs.obs_index(2, 2)) == 0.2);
}

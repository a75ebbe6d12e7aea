#include "qhmm/panel.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "qhmm/errors.hpp"

namespace qhmm {

namespace {

void require_finite(const std::vector<double>& v, const std::string& where) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      fail(ErrorCode::NonFiniteValue, "non-finite value in " + where);
    }
  }
}

}  // namespace

PanelDataset validate_dataset(std::vector<PanelRecord> records,
                              std::vector<std::string> x_names,
                              std::vector<std::string> z_names,
                              std::vector<std::string> w_names) {
  if (records.empty()) {
    fail(ErrorCode::DimensionMismatch, "empty record set");
  }
  const int p = static_cast<int>(records.front().x.size());
  const int r = static_cast<int>(records.front().z.size());
  const int d = static_cast<int>(records.front().w.size());
  for (const auto& rec : records) {
    if (static_cast<int>(rec.x.size()) != p ||
        static_cast<int>(rec.z.size()) != r ||
        static_cast<int>(rec.w.size()) != d) {
      fail(ErrorCode::DimensionMismatch,
           "covariate dimensions differ across records (unit " + rec.unit_id +
               ")");
    }
    if (!std::isfinite(rec.y)) {
      fail(ErrorCode::NonFiniteValue, "non-finite response, unit " + rec.unit_id);
    }
    require_finite(rec.x, "x, unit " + rec.unit_id);
    require_finite(rec.z, "z, unit " + rec.unit_id);
    require_finite(rec.w, "w, unit " + rec.unit_id);
  }

  // group by unit id in first-appearance order, then sort each group by time
  std::vector<std::string> order;
  std::map<std::string, std::vector<const PanelRecord*>> groups;
  for (const auto& rec : records) {
    auto [it, inserted] = groups.try_emplace(rec.unit_id);
    if (inserted) order.push_back(rec.unit_id);
    it->second.push_back(&rec);
  }

  PanelDataset ds;
  const int n = static_cast<int>(order.size());
  const int n_obs = static_cast<int>(records.size());
  ds.T_.resize(n);
  ds.offset_.resize(n + 1);
  ds.y_.resize(n_obs);
  ds.X_.resize(n_obs, p);
  ds.Z_.resize(n_obs, r);
  ds.W_.resize(n_obs, d);
  ds.unit_ids_ = order;

  int row = 0;
  for (int i = 0; i < n; ++i) {
    auto& group = groups[order[i]];
    std::sort(group.begin(), group.end(),
              [](const PanelRecord* a, const PanelRecord* b) {
                return a->time < b->time;
              });
    ds.offset_[i] = row;
    ds.T_[i] = static_cast<int>(group.size());
    for (int t = 0; t < ds.T_[i]; ++t) {
      const PanelRecord& rec = *group[t];
      if (rec.time != t + 1) {
        fail(ErrorCode::NonMonotoneDropout,
             "unit " + rec.unit_id + ": occasions are not consecutive 1..T_i" +
                 " (saw time " + std::to_string(rec.time) + " at position " +
                 std::to_string(t + 1) + ")");
      }
      ds.y_[row] = rec.y;
      for (int j = 0; j < p; ++j) ds.X_(row, j) = rec.x[j];
      for (int j = 0; j < r; ++j) ds.Z_(row, j) = rec.z[j];
      for (int j = 0; j < d; ++j) ds.W_(row, j) = rec.w[j];
      ++row;
    }
  }
  ds.offset_[n] = row;

  auto default_names = [](std::vector<std::string>& names, int k,
                          const char* prefix) {
    if (names.empty()) {
      for (int j = 0; j < k; ++j) {
        names.push_back(std::string(prefix) + std::to_string(j + 1));
      }
    }
  };
  default_names(x_names, p, "x");
  default_names(z_names, r, "z");
  default_names(w_names, d, "w");
  if (static_cast<int>(x_names.size()) != p ||
      static_cast<int>(z_names.size()) != r ||
      static_cast<int>(w_names.size()) != d) {
    fail(ErrorCode::DimensionMismatch, "column-name counts do not match x/z/w");
  }
  ds.x_names_ = std::move(x_names);
  ds.z_names_ = std::move(z_names);
  ds.w_names_ = std::move(w_names);
  return ds;
}

PanelDataset PanelDataset::resample_units(
    const std::vector<int>& unit_indices) const {
  PanelDataset out;
  const int n = static_cast<int>(unit_indices.size());
  int n_obs = 0;
  for (int i : unit_indices) n_obs += T_[i];
  out.T_.resize(n);
  out.offset_.resize(n + 1);
  out.y_.resize(n_obs);
  out.X_.resize(n_obs, X_.cols());
  out.Z_.resize(n_obs, Z_.cols());
  out.W_.resize(n_obs, W_.cols());
  out.unit_ids_.reserve(n);
  out.x_names_ = x_names_;
  out.z_names_ = z_names_;
  out.w_names_ = w_names_;
  int row = 0;
  for (int k = 0; k < n; ++k) {
    int i = unit_indices[k];
    out.offset_[k] = row;
    out.T_[k] = T_[i];
    out.unit_ids_.push_back(unit_ids_[i] + "#" + std::to_string(k));
    for (int t = 0; t < T_[i]; ++t, ++row) {
      int src = offset_[i] + t;
      out.y_[row] = y_[src];
      out.X_.row(row) = X_.row(src);
      out.Z_.row(row) = Z_.row(src);
      out.W_.row(row) = W_.row(src);
    }
  }
  out.offset_[n] = row;
  return out;
}

}  // namespace qhmm

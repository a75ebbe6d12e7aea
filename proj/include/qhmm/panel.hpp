#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace qhmm {

// One long-format input row. x/z/w are the declared covariate blocks; z and w
// model time-constant and state-dependent random departures and may share
// named columns with x (the mapping is declared, not enforced).
struct PanelRecord {
  std::string unit_id;
  int time = 0;  // 1-based occasion index
  double y = 0.0;
  std::vector<double> x, z, w;
};

// Unbalanced longitudinal panel with monotone drop-out. Units are re-indexed
// densely 0..n-1; per unit, occasions are stored contiguously in time order.
// Immutable after construction; safe to share across concurrent fits.
class PanelDataset {
 public:
  int n_units() const { return static_cast<int>(T_.size()); }
  int n_obs() const { return static_cast<int>(y_.size()); }
  int p() const { return static_cast<int>(X_.cols()); }
  int r() const { return static_cast<int>(Z_.cols()); }
  int d() const { return static_cast<int>(W_.cols()); }

  int T(int i) const { return T_[i]; }
  int offset(int i) const { return offset_[i]; }  // first obs row of unit i
  int obs_index(int i, int t) const { return offset_[i] + t - 1; }  // t 1-based
  int total_T() const { return n_obs(); }

  double y(int obs) const { return y_[obs]; }
  const std::vector<double>& y() const { return y_; }
  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::MatrixXd& Z() const { return Z_; }
  const Eigen::MatrixXd& W() const { return W_; }

  const std::string& unit_id(int i) const { return unit_ids_[i]; }
  const std::vector<std::string>& x_names() const { return x_names_; }
  const std::vector<std::string>& z_names() const { return z_names_; }
  const std::vector<std::string>& w_names() const { return w_names_; }

  // Subset by unit indices (with repetition), preserving each unit's full
  // sequence; used by the block bootstrap.
  PanelDataset resample_units(const std::vector<int>& unit_indices) const;

  friend PanelDataset validate_dataset(std::vector<PanelRecord> records,
                                       std::vector<std::string> x_names,
                                       std::vector<std::string> z_names,
                                       std::vector<std::string> w_names);

 private:
  std::vector<int> T_, offset_;
  std::vector<double> y_;
  Eigen::MatrixXd X_, Z_, W_;
  std::vector<std::string> unit_ids_, x_names_, z_names_, w_names_;
};

// Validates raw long-format records: consecutive 1..T_i occasions per unit
// (monotone drop-out), constant covariate dimensions, finite values.
// Throws NonMonotoneDropout / DimensionMismatch / NonFiniteValue.
PanelDataset validate_dataset(std::vector<PanelRecord> records,
                              std::vector<std::string> x_names = {},
                              std::vector<std::string> z_names = {},
                              std::vector<std::string> w_names = {});

}  // namespace qhmm

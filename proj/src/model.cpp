#include "qhmm/model.hpp"

#include <cmath>

#include "qhmm/errors.hpp"

namespace qhmm {

std::string prior_mode_name(PriorMode mode) {
  return mode == PriorMode::kConstantMixture ? "constant" : "dropout";
}

PriorMode prior_mode_from_name(const std::string& name) {
  if (name == "constant") return PriorMode::kConstantMixture;
  if (name == "dropout") return PriorMode::kDropout;
  fail(ErrorCode::ParseError, "unknown prior mode '" + name +
                                  "' (expected 'constant' or 'dropout')");
}

void ModelSpec::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) {
    fail(ErrorCode::DimensionMismatch, "tau must lie in (0,1)");
  }
  if (m < 1 || G < 1) {
    fail(ErrorCode::DimensionMismatch, "m and G must be >= 1");
  }
  if (!(eps_em > 0.0)) {
    fail(ErrorCode::DimensionMismatch, "eps_em must be > 0");
  }
  if (max_iter < 1) {
    fail(ErrorCode::DimensionMismatch, "max_iter must be >= 1");
  }
}

namespace {

constexpr double kProbTol = 1e-10;

void check_prob_vector(const Eigen::VectorXd& v, const std::string& name) {
  double sum = 0.0;
  for (int k = 0; k < v.size(); ++k) {
    if (!(v[k] >= -kProbTol && v[k] <= 1.0 + kProbTol)) {
      fail(ErrorCode::DimensionMismatch, name + " entries must lie in [0,1]");
    }
    sum += v[k];
  }
  if (std::abs(sum - 1.0) > kProbTol) {
    fail(ErrorCode::DimensionMismatch, name + " must sum to 1 (got " +
                                           std::to_string(sum) + ")");
  }
}

}  // namespace

void ParamSet::validate(const ModelSpec& spec, int p, int r, int d) const {
  if (beta.size() != p) {
    fail(ErrorCode::DimensionMismatch, "beta has wrong length");
  }
  if (static_cast<int>(alpha.size()) != spec.m) {
    fail(ErrorCode::DimensionMismatch, "alpha has wrong state count");
  }
  for (const auto& a : alpha) {
    if (a.size() != d) fail(ErrorCode::DimensionMismatch, "alpha_h wrong length");
  }
  if (static_cast<int>(b.size()) != spec.G) {
    fail(ErrorCode::DimensionMismatch, "b has wrong component count");
  }
  for (const auto& bg : b) {
    if (bg.size() != r) fail(ErrorCode::DimensionMismatch, "b_g wrong length");
  }
  if (delta.size() != spec.m || Q.rows() != spec.m || Q.cols() != spec.m) {
    fail(ErrorCode::DimensionMismatch, "delta/Q have wrong dimensions");
  }
  check_prob_vector(delta, "delta");
  for (int k = 0; k < spec.m; ++k) {
    check_prob_vector(Q.row(k), "Q row " + std::to_string(k + 1));
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    fail(ErrorCode::NonPositiveScale, "sigma must be positive and finite");
  }
  if (spec.prior_mode == PriorMode::kConstantMixture) {
    if (pi.size() != spec.G) {
      fail(ErrorCode::DimensionMismatch, "pi has wrong length");
    }
    check_prob_vector(pi, "pi");
  } else {
    if (lambda0.size() != spec.G - 1) {
      fail(ErrorCode::DimensionMismatch, "lambda0 has wrong length");
    }
    for (int g = 1; g < lambda0.size(); ++g) {
      if (lambda0[g] < lambda0[g - 1]) {
        fail(ErrorCode::DimensionMismatch, "lambda0 must be nondecreasing");
      }
    }
    if (!std::isfinite(lambda1)) {
      fail(ErrorCode::NonFiniteValue, "lambda1 must be finite");
    }
  }
}

PosteriorSet::PosteriorSet(const PanelDataset& data, int m, int G)
    : m_(m), G_(G), n_units_(data.n_units()) {
  obs_offset_.resize(n_units_ + 1);
  pair_offset_.resize(n_units_ + 1);
  T_.resize(n_units_);
  for (int i = 0; i < n_units_; ++i) {
    obs_offset_[i] = data.offset(i);
    pair_offset_[i] = data.offset(i) - i;  // sum of (T_j - 1) for j < i
    T_[i] = data.T(i);
  }
  obs_offset_[n_units_] = data.n_obs();
  pair_offset_[n_units_] = data.n_obs() - n_units_;
  u_single_.assign(static_cast<std::size_t>(data.n_obs()) * m_, 0.0);
  u_pair_.assign(static_cast<std::size_t>(pair_offset_[n_units_]) * m_ * m_, 0.0);
  zeta_.assign(static_cast<std::size_t>(n_units_) * G_, 0.0);
  u_cond_.assign(static_cast<std::size_t>(data.n_obs()) * m_ * G_, 0.0);
}

void PosteriorSet::permute_states(const std::vector<int>& perm) {
  std::vector<double> tmp(u_single_.size());
  const int n_obs = obs_offset_[n_units_];
  for (int obs = 0; obs < n_obs; ++obs) {
    for (int h = 0; h < m_; ++h) {
      tmp[obs * m_ + h] = u_single_[obs * m_ + perm[h]];
    }
  }
  u_single_.swap(tmp);
  std::vector<double> tmp2(u_pair_.size());
  const int n_pair = pair_offset_[n_units_];
  for (int idx = 0; idx < n_pair; ++idx) {
    for (int k = 0; k < m_; ++k) {
      for (int h = 0; h < m_; ++h) {
        tmp2[(idx * m_ + k) * m_ + h] =
            u_pair_[(idx * m_ + perm[k]) * m_ + perm[h]];
      }
    }
  }
  u_pair_.swap(tmp2);
  std::vector<double> tmp3(u_cond_.size());
  for (int obs = 0; obs < n_obs; ++obs) {
    for (int h = 0; h < m_; ++h) {
      for (int g = 0; g < G_; ++g) {
        tmp3[(obs * m_ + h) * G_ + g] = u_cond_[(obs * m_ + perm[h]) * G_ + g];
      }
    }
  }
  u_cond_.swap(tmp3);
}

void PosteriorSet::permute_components(const std::vector<int>& perm) {
  std::vector<double> tmp(zeta_.size());
  for (int i = 0; i < n_units_; ++i) {
    for (int g = 0; g < G_; ++g) {
      tmp[i * G_ + g] = zeta_[i * G_ + perm[g]];
    }
  }
  zeta_.swap(tmp);
  std::vector<double> tmp2(u_cond_.size());
  const int n_obs = obs_offset_[n_units_];
  for (int obs = 0; obs < n_obs; ++obs) {
    for (int h = 0; h < m_; ++h) {
      for (int g = 0; g < G_; ++g) {
        tmp2[(obs * m_ + h) * G_ + g] = u_cond_[(obs * m_ + h) * G_ + perm[g]];
      }
    }
  }
  u_cond_.swap(tmp2);
}

}  // namespace qhmm

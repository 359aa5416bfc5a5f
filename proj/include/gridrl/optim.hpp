#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gridrl/autodiff.hpp"

namespace gridrl::ad {

struct NamedParam {
  std::string name;
  Matrix* value;
};
using ParamList = std::vector<NamedParam>;

std::vector<Matrix*> pointers(const ParamList& params);
std::vector<const Matrix*> const_pointers(const ParamList& params);

/// uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(Index fan_in, Index fan_out, std::mt19937_64& rng);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

/// One bias-corrected Adam update in place. Throws ShapeError on mismatch.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state);

/// Rescales grads so their global L2 norm is at most max_norm; returns the
/// norm before clipping.
double clip_grad_norm(std::span<Matrix> grads, double max_norm);

/// FNV-1a over names, shapes and the raw bytes of every value.
std::uint64_t checksum(const ParamList& params);

}  // namespace gridrl::ad

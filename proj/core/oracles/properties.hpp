#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "geosde/matrix.hpp"

namespace geosde::oracle {

struct PropertyResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;      // largest observed error (or ratio, for bounds)
  double tolerance = 0.0;
  std::size_t cases = 0;
  std::string detail;
};

/// J (D x d), U (D x d, orthonormal) -> 1/2 ||P_hat - U U^T||_F^2.
using TangentLossFn = std::function<double(const Matrix& j, const Matrix& u)>;

struct PropertyOptions {
  std::uint64_t seed = 20240611;
  /// Implementation under test for the trace-form check. Defaults to the
  /// library's tangent_loss_trace; swap in a corrupted one for mutation tests.
  TangentLossFn tangent_loss;
};

PropertyResult check_ito_round_trip(std::uint64_t seed);
PropertyResult check_tangent_trace_form(const TangentLossFn& loss, std::uint64_t seed);
PropertyResult check_bias_decomposition(std::uint64_t seed);
PropertyResult check_coordinate_invariance(std::uint64_t seed);
PropertyResult check_projector_identities(std::uint64_t seed);
PropertyResult check_projector_lipschitz(std::uint64_t seed);
PropertyResult check_covariation_identity(std::uint64_t seed);
PropertyResult check_network_autodiff(std::uint64_t seed);
PropertyResult check_stage1_gradient(std::uint64_t seed);
PropertyResult check_hessian_contraction(std::uint64_t seed);
PropertyResult check_mfpt_radial();
PropertyResult check_mfpt_dwell_scan();
PropertyResult check_mfpt_crn(std::uint64_t seed);

std::vector<PropertyResult> run_property_suite(const PropertyOptions& options = {});

}  // namespace geosde::oracle

#pragma once
#include <vector>

#include "mat.hpp"
#include "nn.hpp"

namespace altlab::metrics {

// Root-mean-square over all weight entries of the network; biases excluded.
double avg_weight_norm(const nn::DenseNetwork& net);

struct DormantReport {
  double fraction = 0.0;                    // dormant hidden units / total hidden units
  std::vector<int> dormant_per_layer;       // per hidden layer
  std::vector<int> units_per_layer;
  std::vector<std::vector<double>> scores;  // per hidden layer, per unit
};

// Dormant-unit scores on a probe batch: s_i = mean_b |h_i(b)| normalized by
// the layer mean of those values; unit i is dormant iff s_i <= tau. A layer
// whose mean activation magnitude is zero counts as entirely dormant.
DormantReport dormant_units(const nn::DenseNetwork& net, const Matrix& probe, double tau);
double dormant_fraction(const nn::DenseNetwork& net, const Matrix& probe, double tau = 0.025);

// ||A||_F^2 / sigma_max(A)^2; defined as 0 for an all-zero matrix.
double stable_rank(const Matrix& a);

// Stable rank of each hidden layer's post-activation matrix on a probe batch.
std::vector<double> stable_rank_per_layer(const nn::DenseNetwork& net, const Matrix& probe);

// Largest eigenvalue of a symmetric PSD matrix via cyclic Jacobi sweeps.
// Exposed for tests; input is overwritten.
double jacobi_max_eigenvalue(Matrix g);

// Trapezoid area under the (steps, returns) curve divided by the step span.
// Needs >= 2 strictly increasing steps.
double normalized_auc(const std::vector<double>& steps, const std::vector<double>& returns);

// Linear interpolation of the return curve at each budget; budgets must lie
// within the curve's step span.
std::vector<double> returns_at_budgets(const std::vector<double>& steps, const std::vector<double>& returns,
                                       const std::vector<double>& budgets);

}  // namespace altlab::metrics

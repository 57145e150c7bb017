#include "plasticity.hpp"

#include <cmath>

#include "errors.hpp"

namespace altlab::metrics {

double avg_weight_norm(const nn::DenseNetwork& net) {
  double sum_sq = 0.0;
  std::size_t n = 0;
  for (const auto& w : net.weights) {
    for (double v : w.data) sum_sq += v * v;
    n += w.size();
  }
  if (n == 0) return 0.0;
  return std::sqrt(sum_sq / static_cast<double>(n));
}

DormantReport dormant_units(const nn::DenseNetwork& net, const Matrix& probe, double tau) {
  if (probe.rows == 0) throw PreconditionError("dormant_units: empty probe batch");
  const nn::ForwardTrace tr = nn::forward(net, probe);
  DormantReport rep;
  int dormant_total = 0, units_total = 0;
  const int hidden_layers = net.layer_count() - 1;
  for (int l = 0; l < hidden_layers; ++l) {
    const Matrix& h = tr.post[l];
    const int units = h.cols;
    std::vector<double> mean_abs(units, 0.0);
    for (int b = 0; b < h.rows; ++b) {
      const double* row = h.row(b);
      for (int j = 0; j < units; ++j) mean_abs[j] += std::abs(row[j]);
    }
    double layer_mean = 0.0;
    for (int j = 0; j < units; ++j) {
      mean_abs[j] /= h.rows;
      layer_mean += mean_abs[j];
    }
    layer_mean /= units;

    std::vector<double> scores(units, 0.0);
    int dormant = 0;
    if (layer_mean == 0.0) {
      dormant = units;  // silent layer: every unit is dormant by convention
    } else {
      for (int j = 0; j < units; ++j) {
        scores[j] = mean_abs[j] / layer_mean;
        if (scores[j] <= tau) ++dormant;
      }
    }
    rep.scores.push_back(std::move(scores));
    rep.dormant_per_layer.push_back(dormant);
    rep.units_per_layer.push_back(units);
    dormant_total += dormant;
    units_total += units;
  }
  rep.fraction = units_total == 0 ? 0.0 : static_cast<double>(dormant_total) / units_total;
  return rep;
}

double dormant_fraction(const nn::DenseNetwork& net, const Matrix& probe, double tau) {
  return dormant_units(net, probe, tau).fraction;
}

double jacobi_max_eigenvalue(Matrix g) {
  if (g.rows != g.cols) throw ShapeError("jacobi_max_eigenvalue: matrix must be square");
  const int n = g.rows;
  if (n == 1) return g.at(0, 0);
  double scale = 0.0;
  for (double v : g.data) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  const double tol = 1e-14 * scale;
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off = std::max(off, std::abs(g.at(p, q)));
    if (off <= tol) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = g.at(p, q);
        if (std::abs(apq) <= tol) continue;
        const double app = g.at(p, p), aqq = g.at(q, q);
        const double theta = 0.5 * (aqq - app) / apq;
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double gkp = g.at(k, p), gkq = g.at(k, q);
          g.at(k, p) = c * gkp - s * gkq;
          g.at(k, q) = s * gkp + c * gkq;
        }
        for (int k = 0; k < n; ++k) {
          const double gpk = g.at(p, k), gqk = g.at(q, k);
          g.at(p, k) = c * gpk - s * gqk;
          g.at(q, k) = s * gpk + c * gqk;
        }
      }
    }
  }
  double lmax = g.at(0, 0);
  for (int i = 1; i < n; ++i) lmax = std::max(lmax, g.at(i, i));
  return lmax;
}

double stable_rank(const Matrix& a) {
  double fro_sq = 0.0;
  for (double v : a.data) {
    if (!std::isfinite(v)) throw NumericError("stable_rank: non-finite entry");
    fro_sq += v * v;
  }
  if (fro_sq == 0.0) return 0.0;

  // Gram matrix on the smaller side; its top eigenvalue is sigma_max^2.
  Matrix g;
  if (a.rows <= a.cols) {
    g = Matrix(a.rows, a.rows);
    for (int i = 0; i < a.rows; ++i)
      for (int j = i; j < a.rows; ++j) {
        double s = 0.0;
        const double* ri = a.row(i);
        const double* rj = a.row(j);
        for (int k = 0; k < a.cols; ++k) s += ri[k] * rj[k];
        g.at(i, j) = s;
        g.at(j, i) = s;
      }
  } else {
    matmul_at(a, a, g);
  }
  const double sigma_max_sq = jacobi_max_eigenvalue(std::move(g));
  return fro_sq / sigma_max_sq;
}

std::vector<double> stable_rank_per_layer(const nn::DenseNetwork& net, const Matrix& probe) {
  const nn::ForwardTrace tr = nn::forward(net, probe);
  std::vector<double> out;
  for (int l = 0; l + 1 < net.layer_count(); ++l) out.push_back(stable_rank(tr.post[l]));
  return out;
}

double normalized_auc(const std::vector<double>& steps, const std::vector<double>& returns) {
  if (steps.size() != returns.size()) throw ShapeError("normalized_auc: steps/returns size mismatch");
  if (steps.size() < 2) throw PreconditionError("normalized_auc: need at least two curve points");
  for (std::size_t i = 1; i < steps.size(); ++i)
    if (steps[i] <= steps[i - 1]) throw PreconditionError("normalized_auc: steps must be strictly increasing");
  double area = 0.0;
  for (std::size_t i = 1; i < steps.size(); ++i)
    area += 0.5 * (returns[i] + returns[i - 1]) * (steps[i] - steps[i - 1]);
  return area / (steps.back() - steps.front());
}

std::vector<double> returns_at_budgets(const std::vector<double>& steps, const std::vector<double>& returns,
                                       const std::vector<double>& budgets) {
  if (steps.size() != returns.size()) throw ShapeError("returns_at_budgets: steps/returns size mismatch");
  if (steps.size() < 2) throw PreconditionError("returns_at_budgets: need at least two curve points");
  for (std::size_t i = 1; i < steps.size(); ++i)
    if (steps[i] <= steps[i - 1]) throw PreconditionError("returns_at_budgets: steps must be strictly increasing");
  std::vector<double> out;
  out.reserve(budgets.size());
  for (double b : budgets) {
    if (b < steps.front() || b > steps.back())
      throw PreconditionError("returns_at_budgets: budget outside the curve span");
    std::size_t hi = 1;
    while (steps[hi] < b) ++hi;
    const double t = (b - steps[hi - 1]) / (steps[hi] - steps[hi - 1]);
    out.push_back(returns[hi - 1] + t * (returns[hi] - returns[hi - 1]));
  }
  return out;
}

}  // namespace altlab::metrics

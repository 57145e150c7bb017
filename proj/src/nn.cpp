#include "nn.hpp"

#include <cmath>

#include "errors.hpp"

namespace altlab::nn {

namespace {
void require_shape(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}
}  // namespace

std::size_t DenseNetwork::param_count() const {
  std::size_t n = 0;
  for (int l = 0; l < layer_count(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

DenseNetwork init_network(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw ConfigError("init_network: need at least input and output layer");
  for (int s : layer_sizes)
    if (s <= 0) throw ConfigError("init_network: layer sizes must be positive");
  DenseNetwork net;
  net.layer_sizes = layer_sizes;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    Matrix w(fan_in, fan_out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
  }
  return net;
}

ForwardTrace forward(const DenseNetwork& net, const Matrix& input) {
  require_shape(input.cols == net.input_dim(), "forward: input dim mismatch");
  require_shape(input.rows > 0, "forward: empty batch");
  ForwardTrace tr;
  tr.input = input;
  tr.pre.resize(net.layer_count());
  tr.post.resize(net.layer_count());
  const Matrix* x = &tr.input;
  for (int l = 0; l < net.layer_count(); ++l) {
    Matrix& z = tr.pre[l];
    matmul(*x, net.weights[l], z);
    const auto& b = net.biases[l];
    for (int i = 0; i < z.rows; ++i) {
      double* zr = z.row(i);
      for (int j = 0; j < z.cols; ++j) zr[j] += b[j];
    }
    tr.post[l] = z;
    if (l + 1 < net.layer_count()) {
      for (double& v : tr.post[l].data)
        if (v < 0.0) v = 0.0;
    }
    x = &tr.post[l];
  }
  return tr;
}

void ParamGrads::scale(double f) {
  for (auto& g : weight_grads)
    for (double& v : g.data) v *= f;
  for (auto& g : bias_grads)
    for (double& v : g) v *= f;
}

double ParamGrads::squared_norm() const {
  double s = 0.0;
  for (const auto& g : weight_grads)
    for (double v : g.data) s += v * v;
  for (const auto& g : bias_grads)
    for (double v : g) s += v * v;
  return s;
}

void ParamGrads::add(const ParamGrads& o) {
  for (std::size_t l = 0; l < weight_grads.size(); ++l) {
    for (std::size_t i = 0; i < weight_grads[l].data.size(); ++i) weight_grads[l].data[i] += o.weight_grads[l].data[i];
    for (std::size_t i = 0; i < bias_grads[l].size(); ++i) bias_grads[l][i] += o.bias_grads[l][i];
  }
}

ParamGrads zeros_like(const DenseNetwork& net) {
  ParamGrads g;
  for (int l = 0; l < net.layer_count(); ++l) {
    g.weight_grads.emplace_back(net.weights[l].rows, net.weights[l].cols);
    g.bias_grads.emplace_back(net.biases[l].size(), 0.0);
  }
  return g;
}

namespace {
void check_trace(const DenseNetwork& net, const ForwardTrace& trace, const Matrix& output_grad) {
  require_shape(static_cast<int>(trace.pre.size()) == net.layer_count(), "backward: trace depth mismatch");
  require_shape(trace.input.cols == net.input_dim(), "backward: trace input dim mismatch");
  for (int l = 0; l < net.layer_count(); ++l)
    require_shape(trace.pre[l].cols == net.layer_sizes[l + 1], "backward: trace layer width mismatch");
  require_shape(output_grad.rows == trace.input.rows && output_grad.cols == net.output_dim(),
                "backward: output_grad shape mismatch");
}

// Shared reverse sweep; param_grads may be null (input-gradient-only path).
void backward_impl(const DenseNetwork& net, const ForwardTrace& trace, const Matrix& output_grad,
                   ParamGrads* param_grads, Matrix* input_grad) {
  check_trace(net, trace, output_grad);
  const int layers = net.layer_count();
  Matrix delta = output_grad;  // dL/d(pre activation) of the current layer
  for (int l = layers - 1; l >= 0; --l) {
    const Matrix& layer_in = (l == 0) ? trace.input : trace.post[l - 1];
    if (param_grads) {
      matmul_at(layer_in, delta, param_grads->weight_grads[l]);
      auto& bg = param_grads->bias_grads[l];
      std::fill(bg.begin(), bg.end(), 0.0);
      for (int i = 0; i < delta.rows; ++i) {
        const double* dr = delta.row(i);
        for (int j = 0; j < delta.cols; ++j) bg[j] += dr[j];
      }
    }
    if (l == 0 && !input_grad) break;
    // delta_prev = (delta * W^T) gated by ReLU'(pre[l-1]); transposing the
    // (small) weight matrix keeps the product on the fast kernel.
    const Matrix wt = transpose(net.weights[l]);
    Matrix prev;
    matmul(delta, wt, prev);
    if (l > 0) {
      const Matrix& pre_prev = trace.pre[l - 1];
      for (std::size_t i = 0; i < prev.data.size(); ++i)
        if (pre_prev.data[i] <= 0.0) prev.data[i] = 0.0;
    }
    if (l == 0) {
      *input_grad = std::move(prev);
      break;
    }
    delta = std::move(prev);
  }
}
}  // namespace

ParamGrads backward(const DenseNetwork& net, const ForwardTrace& trace, const Matrix& output_grad,
                    Matrix* input_grad) {
  ParamGrads g = zeros_like(net);
  backward_impl(net, trace, output_grad, &g, input_grad);
  return g;
}

Matrix backward_input(const DenseNetwork& net, const ForwardTrace& trace, const Matrix& output_grad) {
  Matrix g;
  backward_impl(net, trace, output_grad, nullptr, &g);
  return g;
}

AdamState make_adam_state(const DenseNetwork& net, const AdamConfig& cfg) {
  AdamState st;
  st.cfg = cfg;
  for (int l = 0; l < net.layer_count(); ++l) {
    st.m_w.emplace_back(net.weights[l].rows, net.weights[l].cols);
    st.v_w.emplace_back(net.weights[l].rows, net.weights[l].cols);
    st.m_b.emplace_back(net.biases[l].size(), 0.0);
    st.v_b.emplace_back(net.biases[l].size(), 0.0);
  }
  return st;
}

namespace {
inline void adam_update_span(double* p, const double* g, double* m, double* v, std::size_t n,
                             const AdamConfig& c, double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(g[i])) throw NumericError("adam_step: non-finite gradient");
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
  }
}
}  // namespace

void adam_step(DenseNetwork& net, const ParamGrads& grads, AdamState& state) {
  require_shape(grads.weight_grads.size() == net.weights.size(), "adam_step: grad layer count mismatch");
  for (int l = 0; l < net.layer_count(); ++l) {
    require_shape(grads.weight_grads[l].same_shape(net.weights[l]), "adam_step: weight grad shape mismatch");
    require_shape(grads.bias_grads[l].size() == net.biases[l].size(), "adam_step: bias grad shape mismatch");
  }
  state.step_count += 1;
  const auto& c = state.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_count));
  for (int l = 0; l < net.layer_count(); ++l) {
    adam_update_span(net.weights[l].data.data(), grads.weight_grads[l].data.data(), state.m_w[l].data.data(),
                     state.v_w[l].data.data(), net.weights[l].size(), c, bc1, bc2);
    adam_update_span(net.biases[l].data(), grads.bias_grads[l].data(), state.m_b[l].data(), state.v_b[l].data(),
                     net.biases[l].size(), c, bc1, bc2);
  }
}

AdamVec make_adam_vec(std::size_t dim, const AdamConfig& cfg) {
  AdamVec st;
  st.cfg = cfg;
  st.m.assign(dim, 0.0);
  st.v.assign(dim, 0.0);
  return st;
}

void adam_step_vec(std::vector<double>& params, const std::vector<double>& grads, AdamVec& state) {
  require_shape(params.size() == grads.size() && params.size() == state.m.size(),
                "adam_step_vec: size mismatch");
  state.step_count += 1;
  const auto& c = state.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_count));
  adam_update_span(params.data(), grads.data(), state.m.data(), state.v.data(), params.size(), c, bc1, bc2);
}

void polyak_update(DenseNetwork& target, const DenseNetwork& online, double tau) {
  if (!target.same_architecture(online)) throw ShapeError("polyak_update: architecture mismatch");
  for (int l = 0; l < target.layer_count(); ++l) {
    double* t = target.weights[l].data.data();
    const double* o = online.weights[l].data.data();
    for (std::size_t i = 0; i < target.weights[l].size(); ++i) t[i] = (1.0 - tau) * t[i] + tau * o[i];
    for (std::size_t i = 0; i < target.biases[l].size(); ++i)
      target.biases[l][i] = (1.0 - tau) * target.biases[l][i] + tau * online.biases[l][i];
  }
}

void reset_parameters(DenseNetwork& net, AdamState& state, std::uint64_t seed) {
  DenseNetwork fresh = init_network(net.layer_sizes, seed);
  net.weights = std::move(fresh.weights);
  net.biases = std::move(fresh.biases);
  for (auto& m : state.m_w) m.zero();
  for (auto& v : state.v_w) v.zero();
  for (auto& m : state.m_b) std::fill(m.begin(), m.end(), 0.0);
  for (auto& v : state.v_b) std::fill(v.begin(), v.end(), 0.0);
  state.step_count = 0;
}

std::vector<double> flatten_params(const DenseNetwork& net) {
  std::vector<double> flat;
  flat.reserve(net.param_count());
  for (int l = 0; l < net.layer_count(); ++l) {
    flat.insert(flat.end(), net.weights[l].data.begin(), net.weights[l].data.end());
    flat.insert(flat.end(), net.biases[l].begin(), net.biases[l].end());
  }
  return flat;
}

void unflatten_params(DenseNetwork& net, const std::vector<double>& flat) {
  if (flat.size() != net.param_count()) throw ShapeError("unflatten_params: size mismatch");
  std::size_t k = 0;
  for (int l = 0; l < net.layer_count(); ++l) {
    for (double& v : net.weights[l].data) v = flat[k++];
    for (double& v : net.biases[l]) v = flat[k++];
  }
}

}  // namespace altlab::nn

#include "hte/learners/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "hte/common/rng.hpp"
#include "hte/kernels/kernels.hpp"

namespace hte::learners {

namespace {

double elu(double z) { return z > 0.0 ? z : std::exp(z) - 1.0; }
double elu_derivative_from_activation(double a) { return a > 0.0 ? 1.0 : a + 1.0; }

// Forward state for one stack of layers over a batch.
struct StackActivations {
  // activations[k] holds the output of layer k (post-ELU except the last
  // layer of an output stack, which stays linear).
  std::vector<Matrix> activations;
};

// batch_in: B x in. Applies every layer; ELU after each except when
// `linear_output` and the layer is last.
void forward_stack(const std::vector<DenseLayer>& layers, const Matrix& batch_in,
                   bool linear_output, StackActivations& state) {
  state.activations.resize(layers.size());
  const Matrix* current = &batch_in;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const DenseLayer& layer = layers[k];
    const std::size_t batch = current->rows();
    const std::size_t out = layer.weights.rows();
    Matrix& z = state.activations[k];
    z = Matrix(batch, out);
    kernels::matmul_nt(current->data(), layer.weights.data(), z.data(), batch, layer.weights.cols(), out);
    const bool apply_elu = !(linear_output && k + 1 == layers.size());
    for (std::size_t i = 0; i < batch; ++i) {
      double* row = z.row(i).data();
      for (std::size_t j = 0; j < out; ++j) {
        row[j] += layer.biases[j];
        if (apply_elu) row[j] = elu(row[j]);
      }
    }
    current = &z;
  }
}

// Backpropagates through one stack. `delta` enters as dLoss/dOutput of the
// stack (post-activation for ELU layers handled internally) and leaves as
// dLoss/dInput of the stack. Gradients accumulate into `grads`.
void backward_stack(const std::vector<DenseLayer>& layers, const Matrix& batch_in,
                    const StackActivations& state, bool linear_output, Matrix& delta,
                    std::vector<DenseLayer>& grads) {
  for (std::size_t k = layers.size(); k-- > 0;) {
    const DenseLayer& layer = layers[k];
    const Matrix& input = k == 0 ? batch_in : state.activations[k - 1];
    const std::size_t batch = delta.rows();
    const std::size_t out = layer.weights.rows();
    const std::size_t in = layer.weights.cols();

    const bool applied_elu = !(linear_output && k + 1 == layers.size());
    if (applied_elu) {
      const Matrix& activation = state.activations[k];
      for (std::size_t i = 0; i < batch; ++i) {
        double* drow = delta.row(i).data();
        const double* arow = activation.row(i).data();
        for (std::size_t j = 0; j < out; ++j) drow[j] *= elu_derivative_from_activation(arow[j]);
      }
    }

    // dW += delta^T * input ; db += column sums of delta.
    Matrix dw(out, in);
    kernels::matmul_tn(delta.data(), input.data(), dw.data(), out, batch, in);
    for (std::size_t j = 0; j < out * in; ++j) grads[k].weights.data()[j] += dw.data()[j];
    for (std::size_t i = 0; i < batch; ++i) {
      const double* drow = delta.row(i).data();
      for (std::size_t j = 0; j < out; ++j) grads[k].biases[j] += drow[j];
    }

    if (k > 0 || true) {
      Matrix next_delta(batch, in);
      kernels::matmul_nn(delta.data(), layer.weights.data(), next_delta.data(), batch, out, in);
      delta = std::move(next_delta);
    }
  }
}

std::vector<DenseLayer> zero_like(const std::vector<DenseLayer>& layers) {
  std::vector<DenseLayer> grads;
  grads.reserve(layers.size());
  for (const auto& layer : layers) {
    DenseLayer g;
    g.weights = Matrix(layer.weights.rows(), layer.weights.cols());
    g.biases.assign(layer.biases.size(), 0.0);
    grads.push_back(std::move(g));
  }
  return grads;
}

std::vector<DenseLayer> build_stack(std::span<const int> widths, std::size_t n_in, bool add_output,
                                    rng::Rng& stream) {
  std::vector<DenseLayer> layers;
  std::size_t fan_in = n_in;
  auto add_layer = [&](std::size_t out) {
    DenseLayer layer;
    layer.weights = Matrix(out, fan_in);
    const double limit = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (std::size_t j = 0; j < out * fan_in; ++j) {
      layer.weights.data()[j] = stream.uniform(-limit, limit);
    }
    layer.biases.assign(out, 0.0);
    layers.push_back(std::move(layer));
    fan_in = out;
  };
  for (int w : widths) {
    if (w < 1) throw LearnerError("layer widths must be >= 1");
    add_layer(static_cast<std::size_t>(w));
  }
  if (add_output) add_layer(1);
  return layers;
}

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = x.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

double l2_term(const MlpModel& model, double l2_penalty) {
  if (l2_penalty == 0.0) return 0.0;
  double total = 0.0;
  auto add = [&](const std::vector<DenseLayer>& layers) {
    for (const auto& layer : layers) {
      total += kernels::sumsq(layer.weights.data(), layer.weights.rows() * layer.weights.cols());
    }
  };
  add(model.shared);
  add(model.head0);
  add(model.head1);
  return l2_penalty * total;
}

struct ForwardResult {
  StackActivations shared;
  StackActivations head0;
  StackActivations head1;
  std::vector<double> outputs;  // per sample, routed by head for two-head nets
};

void forward_model(const MlpModel& model, const Matrix& batch, std::span<const std::uint8_t> heads,
                   ForwardResult& result) {
  forward_stack(model.shared, batch, /*linear_output=*/false, result.shared);
  const Matrix& representation =
      model.shared.empty() ? batch : result.shared.activations.back();
  forward_stack(model.head0, representation, /*linear_output=*/true, result.head0);
  const std::size_t n = batch.rows();
  result.outputs.resize(n);
  if (model.architecture == MlpArchitecture::PlainRegressor) {
    for (std::size_t i = 0; i < n; ++i) result.outputs[i] = result.head0.activations.back()(i, 0);
    return;
  }
  forward_stack(model.head1, representation, /*linear_output=*/true, result.head1);
  for (std::size_t i = 0; i < n; ++i) {
    result.outputs[i] = heads[i] ? result.head1.activations.back()(i, 0)
                                 : result.head0.activations.back()(i, 0);
  }
}

}  // namespace

double mlp_loss_and_gradient(const MlpModel& model, const Matrix& x, std::span<const double> y,
                             std::span<const double> weights, std::span<const std::uint8_t> heads,
                             double l2_penalty, MlpGradients* gradients) {
  const std::size_t n = x.rows();
  if (y.size() != n) throw LearnerError("mlp loss: target length mismatch");
  const bool two_head = model.architecture == MlpArchitecture::SharedRepresentationTwoHeads;
  if (two_head && heads.size() != n) throw LearnerError("mlp loss: head routing required");

  ForwardResult forward;
  forward_model(model, x, heads, forward);

  double loss = 0.0;
  std::vector<double> output_grad(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const double err = forward.outputs[i] - y[i];
    loss += w * err * err;
    output_grad[i] = 2.0 * inv_n * w * err;
  }
  loss = loss * inv_n + l2_term(model, l2_penalty);

  if (gradients == nullptr) return loss;

  gradients->shared = zero_like(model.shared);
  gradients->head0 = zero_like(model.head0);
  gradients->head1 = zero_like(model.head1);

  const Matrix& representation = model.shared.empty() ? x : forward.shared.activations.back();
  const std::size_t rep_width = representation.cols();
  Matrix rep_delta(n, rep_width);

  // Head deltas: each sample's gradient flows through its own head only.
  {
    Matrix delta0(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      delta0(i, 0) = (two_head && heads[i]) ? 0.0 : output_grad[i];
    }
    backward_stack(model.head0, representation, forward.head0, /*linear_output=*/true, delta0,
                   gradients->head0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < rep_width; ++j) rep_delta(i, j) = delta0(i, j);
    }
  }
  if (two_head) {
    Matrix delta1(n, 1);
    for (std::size_t i = 0; i < n; ++i) delta1(i, 0) = heads[i] ? output_grad[i] : 0.0;
    backward_stack(model.head1, representation, forward.head1, /*linear_output=*/true, delta1,
                   gradients->head1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < rep_width; ++j) rep_delta(i, j) += delta1(i, j);
    }
  }
  if (!model.shared.empty()) {
    backward_stack(model.shared, x, forward.shared, /*linear_output=*/false, rep_delta,
                   gradients->shared);
  }

  // d(l2 * sum W^2)/dW = 2 * l2 * W.
  auto add_l2 = [&](const std::vector<DenseLayer>& layers, std::vector<DenseLayer>& grads) {
    if (l2_penalty == 0.0) return;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      kernels::axpy(2.0 * l2_penalty, layers[k].weights.data(), grads[k].weights.data(),
                    layers[k].weights.rows() * layers[k].weights.cols());
    }
  };
  add_l2(model.shared, gradients->shared);
  add_l2(model.head0, gradients->head0);
  add_l2(model.head1, gradients->head1);
  return loss;
}

namespace {

struct AdamState {
  std::vector<DenseLayer> m;
  std::vector<DenseLayer> v;
};

void adam_update(std::vector<DenseLayer>& layers, const std::vector<DenseLayer>& grads,
                 AdamState& state, const MlpParams& params, double beta1_power, double beta2_power) {
  const double correction1 = 1.0 - beta1_power;
  const double correction2 = 1.0 - beta2_power;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto update = [&](double* value, double* m, double* v, const double* g, std::size_t count) {
      for (std::size_t j = 0; j < count; ++j) {
        m[j] = params.adam_beta1 * m[j] + (1.0 - params.adam_beta1) * g[j];
        v[j] = params.adam_beta2 * v[j] + (1.0 - params.adam_beta2) * g[j] * g[j];
        const double m_hat = m[j] / correction1;
        const double v_hat = v[j] / correction2;
        value[j] -= params.learning_rate * m_hat / (std::sqrt(v_hat) + params.adam_epsilon);
      }
    };
    update(layers[k].weights.data(), state.m[k].weights.data(), state.v[k].weights.data(),
           grads[k].weights.data(), layers[k].weights.rows() * layers[k].weights.cols());
    update(layers[k].biases.data(), state.m[k].biases.data(), state.v[k].biases.data(),
           grads[k].biases.data(), layers[k].biases.size());
  }
}

double validation_loss(const MlpModel& model, const Matrix& x_val, std::span<const double> y_val,
                       std::span<const double> w_val, std::span<const std::uint8_t> h_val) {
  if (x_val.rows() == 0) return 0.0;
  ForwardResult forward;
  forward_model(model, x_val, h_val, forward);
  double loss = 0.0;
  for (std::size_t i = 0; i < x_val.rows(); ++i) {
    const double w = w_val.empty() ? 1.0 : w_val[i];
    const double err = forward.outputs[i] - y_val[i];
    loss += w * err * err;
  }
  return loss / static_cast<double>(x_val.rows());
}

template <class T>
std::vector<T> gather(std::span<const T> values, std::span<const std::size_t> idx) {
  if (values.empty()) return {};
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(values[i]);
  return out;
}

}  // namespace

MlpModel fit_mlp(const MlpTrainingData& data, const MlpParams& params, MlpArchitecture architecture) {
  if (data.x == nullptr) throw LearnerError("fit_mlp: missing design matrix");
  const Matrix& x = *data.x;
  const std::size_t n = x.rows();
  if (data.y.size() != n) throw LearnerError("fit_mlp: target length mismatch");
  const bool two_head = architecture == MlpArchitecture::SharedRepresentationTwoHeads;
  if (two_head && data.heads.size() != n) {
    throw LearnerError("fit_mlp: two-head architecture requires per-sample treatment routing");
  }
  if (params.minibatch_size < 1) throw LearnerError("fit_mlp: minibatch_size must be >= 1");
  if (!(params.validation_fraction > 0.0 && params.validation_fraction < 1.0)) {
    throw LearnerError("fit_mlp: validation_fraction must lie in (0,1)");
  }

  rng::Rng stream(rng::derive_seed(params.seed, {0x317}));

  MlpModel model;
  model.architecture = architecture;
  model.n_inputs = x.cols();
  model.shared = build_stack(params.representation_layers, x.cols(), /*add_output=*/false, stream);
  const std::size_t rep_width = params.representation_layers.empty()
                                    ? x.cols()
                                    : static_cast<std::size_t>(params.representation_layers.back());
  model.head0 = build_stack(params.hypothesis_layers, rep_width, /*add_output=*/true, stream);
  if (two_head) {
    model.head1 = build_stack(params.hypothesis_layers, rep_width, /*add_output=*/true, stream);
  }

  // Validation split.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  stream.shuffle(order);
  auto n_val = static_cast<std::size_t>(params.validation_fraction * static_cast<double>(n));
  if (n_val >= n) n_val = n - 1;
  const std::span<const std::size_t> val_idx(order.data(), n_val);
  std::vector<std::size_t> fit_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  if (fit_idx.empty()) throw LearnerError("fit_mlp: empty training partition");

  const Matrix x_val = gather_rows(x, val_idx);
  const std::vector<double> y_val = gather(data.y, val_idx);
  const std::vector<double> w_val = gather(data.weights, val_idx);
  const std::vector<std::uint8_t> h_val = gather(data.heads, val_idx);

  AdamState adam;
  adam.m = zero_like(model.shared);
  adam.v = zero_like(model.shared);
  AdamState adam_head0{zero_like(model.head0), zero_like(model.head0)};
  AdamState adam_head1{zero_like(model.head1), zero_like(model.head1)};

  struct Snapshot {
    std::vector<DenseLayer> shared, head0, head1;
  };
  Snapshot best{model.shared, model.head0, model.head1};
  double best_val = n_val > 0
                        ? validation_loss(model, x_val, y_val, w_val, h_val)
                        : std::numeric_limits<double>::infinity();
  model.best_validation_loss = best_val;

  MlpGradients grads;
  double beta1_power = 1.0, beta2_power = 1.0;
  int stale_epochs = 0;
  double current_val = best_val;

  for (int epoch = 0; epoch < params.max_epochs; ++epoch) {
    stream.shuffle(fit_idx);
    const std::size_t batch_size = static_cast<std::size_t>(params.minibatch_size);
    for (std::size_t start = 0; start < fit_idx.size(); start += batch_size) {
      const std::size_t stop = std::min(fit_idx.size(), start + batch_size);
      const std::span<const std::size_t> batch_idx(fit_idx.data() + start, stop - start);
      const Matrix x_batch = gather_rows(x, batch_idx);
      const std::vector<double> y_batch = gather(data.y, batch_idx);
      const std::vector<double> w_batch = gather(data.weights, batch_idx);
      const std::vector<std::uint8_t> h_batch = gather(data.heads, batch_idx);

      const double loss =
          mlp_loss_and_gradient(model, x_batch, y_batch, w_batch, h_batch, params.l2_penalty, &grads);
      if (!std::isfinite(loss)) {
        throw MlpDivergence("training loss became non-finite at epoch " + std::to_string(epoch),
                            epoch);
      }
      beta1_power *= params.adam_beta1;
      beta2_power *= params.adam_beta2;
      adam_update(model.shared, grads.shared, adam, params, beta1_power, beta2_power);
      adam_update(model.head0, grads.head0, adam_head0, params, beta1_power, beta2_power);
      if (two_head) adam_update(model.head1, grads.head1, adam_head1, params, beta1_power, beta2_power);
    }
    model.epochs_trained = epoch + 1;

    if (n_val == 0) continue;
    current_val = validation_loss(model, x_val, y_val, w_val, h_val);
    if (!std::isfinite(current_val)) {
      throw MlpDivergence("validation loss became non-finite at epoch " + std::to_string(epoch),
                          epoch);
    }
    if (current_val < best_val - 1e-12) {
      best_val = current_val;
      best = {model.shared, model.head0, model.head1};
      stale_epochs = 0;
    } else {
      ++stale_epochs;
      if (stale_epochs >= params.patience) break;
    }
  }

  model.final_validation_loss = current_val;
  model.best_validation_loss = best_val;
  if (n_val > 0) {
    model.shared = std::move(best.shared);
    model.head0 = std::move(best.head0);
    model.head1 = std::move(best.head1);
  }
  return model;
}

std::vector<double> predict_mlp(const MlpModel& model, const Matrix& x, std::optional<Head> head) {
  if (x.cols() != model.n_inputs) throw LearnerError("predict_mlp: feature count mismatch");
  const bool two_head = model.architecture == MlpArchitecture::SharedRepresentationTwoHeads;
  if (two_head && !head.has_value()) throw LearnerError("predict_mlp: head selector required");
  if (!two_head && head.has_value() && *head == Head::Head1) {
    throw LearnerError("predict_mlp: plain regressor has no Head1");
  }

  StackActivations shared_state;
  forward_stack(model.shared, x, /*linear_output=*/false, shared_state);
  const Matrix& representation = model.shared.empty() ? x : shared_state.activations.back();
  const std::vector<DenseLayer>& stack =
      (two_head && *head == Head::Head1) ? model.head1 : model.head0;
  StackActivations head_state;
  forward_stack(stack, representation, /*linear_output=*/true, head_state);

  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = head_state.activations.back()(i, 0);
  return out;
}

}  // namespace hte::learners

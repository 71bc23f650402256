#pragma once

// Feedforward regression network trained from scratch: dense ELU layers,
// minibatch Adam on (weighted) squared error with an l2 penalty on weight
// matrices, and early stopping on a held-out validation split with
// best-weight restoration.
//
// Two architectures: a plain regressor (representation + hypothesis stacks
// feeding one linear output) and a shared-representation two-head network
// whose per-sample loss is routed through the head matching the sample's
// treatment.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "hte/common/matrix.hpp"
#include "hte/learners/forest.hpp"  // LearnerError

namespace hte::learners {

struct MlpParams {
  std::vector<int> representation_layers{200, 200, 200};
  std::vector<int> hypothesis_layers{100, 100};
  double learning_rate = 1e-3;
  int minibatch_size = 100;
  double l2_penalty = 1e-4;
  double validation_fraction = 0.30;
  int patience = 10;  // non-improving validation epochs before stopping
  int max_epochs = 300;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
};

enum class MlpArchitecture { PlainRegressor, SharedRepresentationTwoHeads };
enum class Head { Head0 = 0, Head1 = 1 };

struct DenseLayer {
  Matrix weights;  // out x in
  std::vector<double> biases;
};

struct MlpModel {
  MlpArchitecture architecture = MlpArchitecture::PlainRegressor;
  std::vector<DenseLayer> shared;  // representation stack, ELU after each layer
  std::vector<DenseLayer> head0;   // hypothesis stack + linear output
  std::vector<DenseLayer> head1;   // two-head only
  std::size_t n_inputs = 0;
  double best_validation_loss = std::numeric_limits<double>::infinity();
  double final_validation_loss = std::numeric_limits<double>::infinity();
  int epochs_trained = 0;
};

class MlpDivergence : public LearnerError {
 public:
  MlpDivergence(const std::string& message, int epoch) : LearnerError(message), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

struct MlpTrainingData {
  const Matrix* x = nullptr;
  std::span<const double> y;
  std::span<const double> weights;        // empty = unweighted
  std::span<const std::uint8_t> heads;    // required for the two-head net
};

MlpModel fit_mlp(const MlpTrainingData& data, const MlpParams& params, MlpArchitecture architecture);

// head must be provided iff the model is two-headed.
std::vector<double> predict_mlp(const MlpModel& model, const Matrix& x,
                                std::optional<Head> head = std::nullopt);

// Loss (weighted mean squared error over the batch plus l2 * sum of squared
// weight-matrix entries) and, when `gradients` is non-null, its analytic
// gradient in a layer structure mirroring the model. Exposed so finite
// difference checks can probe the exact training objective.
struct MlpGradients {
  std::vector<DenseLayer> shared;
  std::vector<DenseLayer> head0;
  std::vector<DenseLayer> head1;
};

double mlp_loss_and_gradient(const MlpModel& model, const Matrix& x, std::span<const double> y,
                             std::span<const double> weights, std::span<const std::uint8_t> heads,
                             double l2_penalty, MlpGradients* gradients);

}  // namespace hte::learners

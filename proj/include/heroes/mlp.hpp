#pragma once

#include <cstddef>
#include <vector>

#include "heroes/tensor.hpp"

namespace heroes {

enum class Head {
  kSoftmaxCrossEntropy,
  // 0.5 * mean over the batch of ||output - target||^2. Test-only head for
  // checking gradients against closed forms.
  kSquaredError,
};

// Feed-forward network: affine layers with ReLU between them.
//
// `input_repeat` tiles the input features that many times before the first
// layer, and `output_fold` sums that many equal-width column tiles of the
// last layer into the final outputs. Both are 1 for a plain MLP. Width-p
// composed models use repeat = fold = p so that every layer, including the
// first and last, carries p x p channel tiles while the feature and class
// counts stay fixed.
struct MlpModel {
  std::vector<Tensor> weights;  // layer l: in_l x out_l
  std::vector<Tensor> biases;   // layer l: [out_l]
  std::size_t input_repeat = 1;
  std::size_t output_fold = 1;
  Head head = Head::kSoftmaxCrossEntropy;

  // Throws ShapeError if dimensions do not chain.
  void validate() const;
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

struct Batch {
  Tensor inputs;            // batch x features
  std::vector<int> labels;  // batch, used by the cross-entropy head
  Tensor targets;           // batch x outputs, used by the squared-error head

  std::size_t size() const { return inputs.rows(); }
};

struct ForwardResult {
  double loss = 0.0;
  Tensor logits;  // batch x outputs (after folding)
};

// One tensor per parameter, shaped like the parameter.
struct Gradients {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

ForwardResult forward(const MlpModel& model, const Batch& batch);
LossAndGradients loss_and_gradients(const MlpModel& model, const Batch& batch);
inline Gradients backward(const MlpModel& model, const Batch& batch) {
  return loss_and_gradients(model, batch).grads;
}

MlpModel sgd_step(MlpModel model, const Gradients& grads, double eta);

// Fraction of samples whose argmax output equals the label.
double accuracy(const MlpModel& model, const Batch& batch);

// Parameters flattened in order (w_0, b_0, w_1, b_1, ...).
std::vector<double> flatten_parameters(const MlpModel& model);
std::vector<double> flatten(const Gradients& grads);

}  // namespace heroes

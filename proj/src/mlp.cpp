#include "heroes/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "heroes/errors.hpp"

namespace heroes {

namespace {

struct Trace {
  std::vector<Tensor> activations;  // input to layer l (after repeat / relu)
  std::vector<Tensor> preacts;      // output of layer l before relu
  Tensor logits;
};

Tensor repeat_columns(const Tensor& x, std::size_t times) {
  if (times == 1) return x;
  const std::size_t b = x.rows(), d = x.cols();
  Tensor out = Tensor::matrix(b, d * times);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t t = 0; t < times; ++t)
      for (std::size_t j = 0; j < d; ++j) out(i, t * d + j) = x(i, j);
  return out;
}

Tensor fold_columns(const Tensor& z, std::size_t fold) {
  if (fold == 1) return z;
  const std::size_t b = z.rows(), c = z.cols() / fold;
  Tensor out = Tensor::matrix(b, c);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t t = 0; t < fold; ++t)
      for (std::size_t j = 0; j < c; ++j) out(i, j) += z(i, t * c + j);
  return out;
}

void check_batch(const MlpModel& model, const Batch& batch) {
  model.validate();
  if (batch.inputs.rank() != 2 || batch.inputs.rows() == 0) throw ShapeError("batch must be a non-empty matrix");
  if (batch.inputs.cols() != model.input_dim())
    throw ShapeError("batch feature dim " + std::to_string(batch.inputs.cols()) + " != model input dim " +
                     std::to_string(model.input_dim()));
  const std::size_t outputs = model.output_dim();
  if (model.head == Head::kSoftmaxCrossEntropy) {
    if (batch.labels.size() != batch.inputs.rows()) throw ShapeError("label count != batch size");
    for (int y : batch.labels)
      if (y < 0 || static_cast<std::size_t>(y) >= outputs)
        throw ShapeError("label " + std::to_string(y) + " outside [0, " + std::to_string(outputs) + ")");
  } else {
    if (batch.targets.rank() != 2 || batch.targets.rows() != batch.inputs.rows() ||
        batch.targets.cols() != outputs)
      throw ShapeError("targets must be batch x outputs");
  }
}

Trace run_forward(const MlpModel& model, const Batch& batch) {
  Trace tr;
  const std::size_t n = model.weights.size();
  tr.activations.reserve(n);
  tr.preacts.reserve(n);
  Tensor h = repeat_columns(batch.inputs, model.input_repeat);
  for (std::size_t l = 0; l < n; ++l) {
    Tensor z = matmul(h, model.weights[l]);
    const Tensor& b = model.biases[l];
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) += b[j];
    tr.activations.push_back(std::move(h));
    if (l + 1 < n) {
      h = z;
      for (double& v : h.storage()) v = std::max(v, 0.0);
    }
    tr.preacts.push_back(std::move(z));
  }
  tr.logits = fold_columns(tr.preacts.back(), model.output_fold);
  return tr;
}

// Returns the loss and fills dlogits with dLoss/dlogits.
double head_loss(const MlpModel& model, const Batch& batch, const Tensor& logits, Tensor* dlogits) {
  const std::size_t bsz = logits.rows(), c = logits.cols();
  const double inv_b = 1.0 / static_cast<double>(bsz);
  if (dlogits) *dlogits = Tensor::matrix(bsz, c);
  double loss = 0.0;
  if (model.head == Head::kSoftmaxCrossEntropy) {
    for (std::size_t i = 0; i < bsz; ++i) {
      double mx = logits(i, 0);
      for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits(i, j));
      double z = 0.0;
      for (std::size_t j = 0; j < c; ++j) z += std::exp(logits(i, j) - mx);
      const double log_z = mx + std::log(z);
      const auto y = static_cast<std::size_t>(batch.labels[i]);
      loss += log_z - logits(i, y);
      if (dlogits) {
        for (std::size_t j = 0; j < c; ++j) (*dlogits)(i, j) = std::exp(logits(i, j) - log_z) * inv_b;
        (*dlogits)(i, y) -= inv_b;
      }
    }
  } else {
    for (std::size_t i = 0; i < bsz; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const double r = logits(i, j) - batch.targets(i, j);
        loss += 0.5 * r * r;
        if (dlogits) (*dlogits)(i, j) = r * inv_b;
      }
  }
  loss *= inv_b;
  if (!std::isfinite(loss)) throw NumericError("loss is not finite");
  return loss;
}

}  // namespace

void MlpModel::validate() const {
  if (weights.empty()) throw ShapeError("model has no layers");
  if (biases.size() != weights.size()) throw ShapeError("one bias vector per layer required");
  if (input_repeat == 0 || output_fold == 0) throw ShapeError("repeat/fold must be positive");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const Tensor& w = weights[l];
    if (w.rank() != 2) throw ShapeError("layer " + std::to_string(l) + " weight must be a matrix");
    if (biases[l].size() != w.cols())
      throw ShapeError("layer " + std::to_string(l) + " bias length " + std::to_string(biases[l].size()) +
                       " != out dim " + std::to_string(w.cols()));
    if (l > 0 && weights[l - 1].cols() != w.rows())
      throw ShapeError("layer " + std::to_string(l) + " in dim " + std::to_string(w.rows()) +
                       " does not chain with previous out dim " + std::to_string(weights[l - 1].cols()));
  }
  if (weights.front().rows() % input_repeat != 0) throw ShapeError("first layer rows not divisible by repeat");
  if (weights.back().cols() % output_fold != 0) throw ShapeError("last layer cols not divisible by fold");
}

std::size_t MlpModel::input_dim() const { return weights.front().rows() / input_repeat; }
std::size_t MlpModel::output_dim() const { return weights.back().cols() / output_fold; }

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

ForwardResult forward(const MlpModel& model, const Batch& batch) {
  check_batch(model, batch);
  Trace tr = run_forward(model, batch);
  require_finite(tr.logits, "forward");
  ForwardResult out;
  out.loss = head_loss(model, batch, tr.logits, nullptr);
  out.logits = std::move(tr.logits);
  return out;
}

LossAndGradients loss_and_gradients(const MlpModel& model, const Batch& batch) {
  check_batch(model, batch);
  Trace tr = run_forward(model, batch);
  require_finite(tr.logits, "forward");
  Tensor dlogits;
  LossAndGradients out;
  out.loss = head_loss(model, batch, tr.logits, &dlogits);

  // Un-fold: every tile of the last layer output receives dlogits.
  const std::size_t n = model.weights.size();
  Tensor delta = Tensor::matrix(dlogits.rows(), model.weights.back().cols());
  const std::size_t c = dlogits.cols();
  for (std::size_t i = 0; i < delta.rows(); ++i)
    for (std::size_t t = 0; t < model.output_fold; ++t)
      for (std::size_t j = 0; j < c; ++j) delta(i, t * c + j) = dlogits(i, j);

  out.grads.weights.resize(n);
  out.grads.biases.resize(n);
  for (std::size_t l = n; l-- > 0;) {
    out.grads.weights[l] = matmul_tn(tr.activations[l], delta);
    Tensor gb({delta.cols()}, 0.0);
    for (std::size_t i = 0; i < delta.rows(); ++i)
      for (std::size_t j = 0; j < delta.cols(); ++j) gb[j] += delta(i, j);
    out.grads.biases[l] = std::move(gb);
    if (l == 0) break;
    Tensor dh = matmul_nt(delta, model.weights[l]);
    const Tensor& z = tr.preacts[l - 1];
    for (std::size_t i = 0; i < dh.size(); ++i)
      if (z[i] <= 0.0) dh[i] = 0.0;
    delta = std::move(dh);
  }
  for (std::size_t l = 0; l < n; ++l) {
    require_finite(out.grads.weights[l], "backward");
    require_finite(out.grads.biases[l], "backward");
  }
  return out;
}

MlpModel sgd_step(MlpModel model, const Gradients& grads, double eta) {
  if (grads.weights.size() != model.weights.size() || grads.biases.size() != model.biases.size())
    throw ShapeError("sgd_step: gradient count does not match parameters");
  auto apply = [eta](Tensor& p, const Tensor& g) {
    require_same_shape(p, g, "sgd_step");
    auto pv = p.values();
    auto gv = g.values();
    for (std::size_t i = 0; i < pv.size(); ++i) pv[i] -= eta * gv[i];
  };
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    apply(model.weights[l], grads.weights[l]);
    apply(model.biases[l], grads.biases[l]);
  }
  for (const Tensor& w : model.weights) require_finite(w, "sgd_step");
  return model;
}

double accuracy(const MlpModel& model, const Batch& batch) {
  const Tensor logits = forward(model, batch).logits;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j)
      if (logits(i, j) > logits(i, best)) best = j;
    if (static_cast<int>(best) == batch.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

std::vector<double> flatten_parameters(const MlpModel& model) {
  std::vector<double> out;
  out.reserve(model.parameter_count());
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    out.insert(out.end(), model.weights[l].storage().begin(), model.weights[l].storage().end());
    out.insert(out.end(), model.biases[l].storage().begin(), model.biases[l].storage().end());
  }
  return out;
}

std::vector<double> flatten(const Gradients& grads) {
  std::vector<double> out;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    out.insert(out.end(), grads.weights[l].storage().begin(), grads.weights[l].storage().end());
    out.insert(out.end(), grads.biases[l].storage().begin(), grads.biases[l].storage().end());
  }
  return out;
}

}  // namespace heroes

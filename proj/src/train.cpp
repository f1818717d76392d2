#include "amqc/train.hpp"

#include <algorithm>

namespace amqc {

namespace {

double loss_at(const Network64& net, const TensorT<double>& input, int label) {
  TensorT<double> p = forward_sample(net, input);
  TensorT<double> y(p.shape);
  y[static_cast<size_t>(label)] = 1.0;
  return cross_entropy(y, p);
}

}  // namespace

double grad_check(const Network64& net, const TensorT<double>& input, int label,
                  const GradCheckOptions& opts) {
  GradsT<double> grads = make_grads(net);
  Trace<double> trace;
  forward_sample(net, input, &trace);
  backward_sample(net, trace, label, grads);
  if (opts.tamper) opts.tamper(grads);

  // Global flat index over all weight tensors, then all bias tensors.
  std::vector<std::pair<size_t, size_t>> spans;  // (tensor id, length)
  size_t total = 0;
  for (size_t p = 0; p < grads.weights.size(); ++p) {
    spans.emplace_back(p, grads.weights[p].size());
    total += grads.weights[p].size();
  }
  for (size_t p = 0; p < grads.biases.size(); ++p) {
    spans.emplace_back(grads.weights.size() + p, grads.biases[p].size());
    total += grads.biases[p].size();
  }

  const size_t n_probe = std::min(opts.coords, total);
  std::vector<size_t> flat(total);
  std::iota(flat.begin(), flat.end(), size_t{0});
  Rng rng(opts.seed);
  for (size_t i = 0; i < n_probe; ++i) {
    const size_t j = i + static_cast<size_t>(rng.below(total - i));
    std::swap(flat[i], flat[j]);
  }

  Network64 probe = net;
  auto param_ref = [&](Network64& n, size_t flat_idx) -> double& {
    size_t rest = flat_idx;
    for (const auto& [tid, len] : spans) {
      if (rest < len) {
        return tid < n.weights.size() ? n.weights[tid][rest]
                                      : n.biases[tid - n.weights.size()][rest];
      }
      rest -= len;
    }
    fail(ErrorKind::state, "grad_check: flat index out of range");
  };
  auto grad_at = [&](size_t flat_idx) -> double {
    size_t rest = flat_idx;
    for (const auto& [tid, len] : spans) {
      if (rest < len)
        return tid < grads.weights.size() ? grads.weights[tid][rest]
                                          : grads.biases[tid - grads.weights.size()][rest];
      rest -= len;
    }
    fail(ErrorKind::state, "grad_check: flat index out of range");
  };

  double max_rel = 0.0;
  for (size_t i = 0; i < n_probe; ++i) {
    const size_t idx = flat[i];
    double& slot = param_ref(probe, idx);
    const double saved = slot;
    slot = saved + opts.h;
    const double lp = loss_at(probe, input, label);
    slot = saved - opts.h;
    const double lm = loss_at(probe, input, label);
    slot = saved;
    const double numeric = (lp - lm) / (2.0 * opts.h);
    const double analytic = grad_at(idx);
    const double rel = std::abs(analytic - numeric) /
                       std::max(1e-8, std::abs(analytic) + std::abs(numeric));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

DataSet to_dataset(const SampleSet& set, int target_h, int target_w) {
  DataSet out;
  out.inputs.reserve(set.samples.size());
  out.labels.reserve(set.samples.size());
  for (const auto& [img, ann] : set.samples) {
    out.inputs.push_back(preprocess(img, target_h, target_w));
    out.labels.push_back(ann.class_id);
  }
  return out;
}

}  // namespace amqc

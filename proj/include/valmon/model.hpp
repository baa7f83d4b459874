#pragma once

#include <functional>
#include <vector>

#include "valmon/data_model.hpp"

namespace valmon {

/// Anything that scores a feature frame, one prediction per row, in order.
class Model {
 public:
  virtual ~Model() = default;
  virtual std::vector<double> predict(const FeatureFrame &frame) const = 0;
};

/// In-process model backed by a callable; mostly for tests and embedding.
class FunctionModel final : public Model {
 public:
  using Fn = std::function<std::vector<double>(const FeatureFrame &)>;
  explicit FunctionModel(Fn fn) : fn_(std::move(fn)) {}

  std::vector<double> predict(const FeatureFrame &frame) const override {
    auto out = fn_(frame);
    if (out.size() != frame.n_rows())
      throw LengthMismatch("model returned " + std::to_string(out.size()) + " predictions for " +
                           std::to_string(frame.n_rows()) + " rows");
    return out;
  }

 private:
  Fn fn_;
};

}  // namespace valmon

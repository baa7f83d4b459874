#pragma once

// Subprocess scoring: the frame goes to the command's stdin as CSV and one
// decimal prediction per row comes back on stdout.

#include <string>
#include <vector>

#include "valmon/data_model.hpp"
#include "valmon/model.hpp"

namespace valmon {

struct ExternalModelSpec {
  std::string command;
  double timeout_seconds = 60.0;
};

/// Runs `command` through /bin/sh. stderr is inherited. On timeout the
/// whole process group is killed.
std::vector<double> score_external(const ExternalModelSpec &spec, const FeatureFrame &frame);

class ExternalModel final : public Model {
 public:
  explicit ExternalModel(ExternalModelSpec spec) : spec_(std::move(spec)) {}

  const ExternalModelSpec &spec() const noexcept { return spec_; }
  std::vector<double> predict(const FeatureFrame &frame) const override { return score_external(spec_, frame); }

 private:
  ExternalModelSpec spec_;
};

}  // namespace valmon

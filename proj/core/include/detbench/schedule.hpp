#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace detbench {

class Rng;

struct ScheduleParams {
  double eta0 = 0.01;
  int total_epochs = 300;
  int batch_size = 64;
  double momentum = 0.937;
  double weight_decay = 0.0005;
};

/// Cosine annealing: eta0 * 0.5 * (1 + cos(pi * t / T)).
double lr_at(int t, const ScheduleParams& p);

/// SGD with momentum; decay is folded into the gradient:
///   v' = mu * v - lr_at(t) * (grad + lambda * param);  param' = param + v'
std::pair<std::vector<double>, std::vector<double>> sgd_step(const std::vector<double>& param,
                                                             const std::vector<double>& grad,
                                                             const std::vector<double>& velocity,
                                                             int t, const ScheduleParams& p);

/// Uniform pick from {320, 352, ..., 640} (multiples of 32).
int sample_train_size(Rng& rng);

struct EarlyStopState {
  double best_metric = 0.0;
  int best_epoch = -1;
  int patience = 50;
  double min_delta = 1e-4;
  bool stopped = false;  // latched
  std::vector<std::pair<int, double>> history;
};

/// Maximize-mode early stopping. Improvement means metric - best >= min_delta
/// and resets the patience window; the stop flag never clears once set.
bool early_stop_update(EarlyStopState& state, int epoch, double metric);

struct CheckpointEntry {
  int epoch = 0;
  double metric = 0.0;
  std::string digest;
  std::string timestamp;  // caller-supplied, may stay empty
};

class CheckpointLedger {
public:
  const CheckpointEntry& record(int epoch, double metric, std::string digest,
                                std::string timestamp = {});
  /// Highest metric; metric ties resolve to the earlier epoch.
  const CheckpointEntry& best() const;
  const std::vector<CheckpointEntry>& entries() const { return entries_; }

  void save_jsonl(const std::filesystem::path& path) const;
  static CheckpointLedger load_jsonl(const std::filesystem::path& path);

private:
  std::vector<CheckpointEntry> entries_;
};

}  // namespace detbench

#include "detbench/schedule.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "detbench/errors.hpp"
#include "detbench/rng.hpp"

namespace detbench {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;

void validate_params(const ScheduleParams& p) {
  if (p.eta0 <= 0.0) raise(Errc::bad_config, "eta0 must be positive");
  if (p.total_epochs < 1) raise(Errc::bad_config, "total_epochs must be >= 1");
  if (p.momentum < 0.0 || p.momentum >= 1.0) raise(Errc::bad_config, "momentum must be in [0,1)");
  if (p.weight_decay < 0.0) raise(Errc::bad_config, "weight_decay must be >= 0");
}
}  // namespace

double lr_at(int t, const ScheduleParams& p) {
  validate_params(p);
  if (t < 0 || t > p.total_epochs) {
    raise(Errc::epoch_out_of_range,
          "epoch " + std::to_string(t) + " outside [0," + std::to_string(p.total_epochs) + "]");
  }
  const double phase = static_cast<double>(t) / static_cast<double>(p.total_epochs);
  return p.eta0 * 0.5 * (1.0 + std::cos(phase * kPi));
}

std::pair<std::vector<double>, std::vector<double>> sgd_step(const std::vector<double>& param,
                                                             const std::vector<double>& grad,
                                                             const std::vector<double>& velocity,
                                                             int t, const ScheduleParams& p) {
  if (param.size() != grad.size() || param.size() != velocity.size()) {
    raise(Errc::length_mismatch, "param/grad/velocity lengths differ");
  }
  const double lr = lr_at(t, p);
  std::vector<double> v_out(param.size()), p_out(param.size());
  for (std::size_t i = 0; i < param.size(); ++i) {
    v_out[i] = p.momentum * velocity[i] - lr * (grad[i] + p.weight_decay * param[i]);
    p_out[i] = param[i] + v_out[i];
  }
  return {std::move(p_out), std::move(v_out)};
}

int sample_train_size(Rng& rng) {
  return 320 + 32 * static_cast<int>(rng.below(11));
}

bool early_stop_update(EarlyStopState& state, int epoch, double metric) {
  if (!state.history.empty() && epoch <= state.history.back().first) {
    raise(Errc::non_monotone_epoch, "epoch " + std::to_string(epoch) + " not increasing");
  }
  if (state.patience < 0) raise(Errc::bad_config, "patience must be >= 0");
  state.history.emplace_back(epoch, metric);

  const bool first = state.best_epoch < 0 && state.history.size() == 1;
  if (first || metric - state.best_metric >= state.min_delta) {
    state.best_metric = metric;
    state.best_epoch = epoch;
  } else if (epoch - state.best_epoch >= state.patience) {
    state.stopped = true;
  }
  return state.stopped;
}

const CheckpointEntry& CheckpointLedger::record(int epoch, double metric, std::string digest,
                                                std::string timestamp) {
  entries_.push_back({epoch, metric, std::move(digest), std::move(timestamp)});
  return entries_.back();
}

const CheckpointEntry& CheckpointLedger::best() const {
  if (entries_.empty()) raise(Errc::empty_list, "no checkpoints recorded");
  const CheckpointEntry* best = &entries_.front();
  for (const auto& e : entries_) {
    if (e.metric > best->metric || (e.metric == best->metric && e.epoch < best->epoch)) {
      best = &e;
    }
  }
  return *best;
}

void CheckpointLedger::save_jsonl(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::io_error, "cannot write " + path.string());
  for (const auto& e : entries_) {
    nlohmann::json j{{"epoch", e.epoch},
                     {"metric", e.metric},
                     {"digest", e.digest},
                     {"timestamp", e.timestamp}};
    out << j.dump() << '\n';
  }
}

CheckpointLedger CheckpointLedger::load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::missing_file, "cannot open " + path.string());
  CheckpointLedger ledger;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ledger.record(j.at("epoch").get<int>(), j.at("metric").get<double>(),
                    j.at("digest").get<std::string>(),
                    j.value("timestamp", std::string{}));
    } catch (const nlohmann::json::exception& e) {
      raise(Errc::malformed_line, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ledger;
}

}  // namespace detbench

// SPDX-License-Identifier: Apache-2.0
#include "gloam/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace gloam {

namespace {

constexpr double kPenaltyFloor = 1e3;
constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343818685;

double gaussian_pdf(double x, double mean, double bandwidth) {
  const double z = (x - mean) / bandwidth;
  return kInvSqrt2Pi / bandwidth * std::exp(-0.5 * z * z);
}

double penalty_loss(const StudyState& state) {
  double worst = 0.0;
  bool any = false;
  for (const Trial& t : state.trials) {
    if (!t.failed && std::isfinite(t.loss)) {
      worst = std::max(worst, t.loss);
      any = true;
    }
  }
  return any ? std::max(kPenaltyFloor, 10.0 * worst) : kPenaltyFloor;
}

void write_journal(const StudyState& state, const std::string& path) {
  if (path.empty()) return;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error(tmp + ": cannot open for writing");
    char buf[64];
    for (const Trial& t : state.trials) {
      out << t.index;
      for (Eigen::Index i = 0; i < t.params.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", t.params[i]);
        out << ' ' << buf;
      }
      std::snprintf(buf, sizeof(buf), "%.17g", t.loss);
      out << ' ' << buf << ' ' << (t.failed ? "failed" : "ok") << '\n';
    }
    if (!out) throw std::runtime_error(tmp + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

double evaluate_objective(const Objective& objective,
                          const Eigen::VectorXd& params, int index,
                          double* wall_seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  double value = std::numeric_limits<double>::quiet_NaN();
  try {
    value = objective(params, index);
  } catch (const std::exception&) {
    value = std::numeric_limits<double>::quiet_NaN();
  }
  *wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return value;
}

Eigen::VectorXd startup_params(const TpeConfig& cfg, int index) {
  Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(index)));
  if (index == 0 && cfg.include_zero_baseline) {
    return Eigen::VectorXd::Zero(cfg.dimension);
  }
  Eigen::VectorXd params(cfg.dimension);
  for (int d = 0; d < cfg.dimension; ++d) {
    params[d] = rng.uniform(cfg.lower, cfg.upper);
  }
  return params;
}

}  // namespace

int StudyState::best_index() const {
  int best = -1;
  for (const Trial& t : trials) {
    if (best < 0 || t.loss < trials[static_cast<std::size_t>(best)].loss) {
      best = t.index;
    }
  }
  return best;
}

Eigen::VectorXd tpe_suggest(const StudyState& state, const TpeConfig& cfg,
                            Rng& rng) {
  const int n = static_cast<int>(state.trials.size());
  Eigen::VectorXd out(cfg.dimension);
  if (n < cfg.startup_trials) {
    for (int d = 0; d < cfg.dimension; ++d) {
      out[d] = rng.uniform(cfg.lower, cfg.upper);
    }
    return out;
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const Trial& ta = state.trials[static_cast<std::size_t>(a)];
    const Trial& tb = state.trials[static_cast<std::size_t>(b)];
    return ta.loss < tb.loss || (ta.loss == tb.loss && ta.index < tb.index);
  });
  const int n_good = std::max(
      1, static_cast<int>(std::ceil(cfg.gamma * static_cast<double>(n))));
  const int n_bad = n - n_good;

  const double range = cfg.upper - cfg.lower;
  const double uniform_pdf = 1.0 / range;
  const double bw_good = std::max(
      range / std::sqrt(static_cast<double>(n_good)), cfg.min_bandwidth);
  const double bw_bad =
      n_bad > 0 ? std::max(range / std::sqrt(static_cast<double>(n_bad)),
                           cfg.min_bandwidth)
                : 0.0;

  std::vector<double> good(static_cast<std::size_t>(n_good));
  std::vector<double> bad(static_cast<std::size_t>(n_bad));

  for (int d = 0; d < cfg.dimension; ++d) {
    for (int i = 0; i < n_good; ++i) {
      good[static_cast<std::size_t>(i)] =
          state.trials[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]
              .params[d];
    }
    for (int i = 0; i < n_bad; ++i) {
      bad[static_cast<std::size_t>(i)] =
          state.trials[static_cast<std::size_t>(
                           order[static_cast<std::size_t>(n_good + i)])]
              .params[d];
    }

    auto density = [&](double x, const std::vector<double>& centers,
                       double bw) {
      double acc = uniform_pdf;
      for (const double c : centers) acc += gaussian_pdf(x, c, bw);
      return acc / static_cast<double>(centers.size() + 1);
    };

    double best_x = cfg.lower;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < cfg.candidates; ++c) {
      // Draw from the good mixture: one uniform component plus one kernel
      // per good trial.
      const int comp = rng.uniform_int(n_good + 1);
      double x = comp == 0
                     ? rng.uniform(cfg.lower, cfg.upper)
                     : good[static_cast<std::size_t>(comp - 1)] +
                           bw_good * rng.normal();
      x = std::min(cfg.upper, std::max(cfg.lower, x));
      const double l = density(x, good, bw_good);
      const double g = n_bad > 0 ? density(x, bad, bw_bad) : uniform_pdf;
      const double score = l / g;
      if (score > best_score) {
        best_score = score;
        best_x = x;
      }
    }
    out[d] = best_x;
  }
  return out;
}

StudyState load_study_journal(const std::string& path, const TpeConfig& cfg) {
  StudyState state;
  std::ifstream in(path);
  if (!in) return state;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Trial trial;
    trial.params.resize(cfg.dimension);
    std::string status;
    if (!(ls >> trial.index)) {
      throw std::runtime_error(path + ": line " + std::to_string(line_number) +
                               ": bad trial index");
    }
    for (int d = 0; d < cfg.dimension; ++d) {
      if (!(ls >> trial.params[d])) {
        throw std::runtime_error(path + ": line " +
                                 std::to_string(line_number) +
                                 ": expected " + std::to_string(cfg.dimension) +
                                 " parameters");
      }
    }
    if (!(ls >> trial.loss >> status) ||
        (status != "ok" && status != "failed")) {
      throw std::runtime_error(path + ": line " + std::to_string(line_number) +
                               ": malformed record");
    }
    trial.failed = status == "failed";
    if (trial.index != static_cast<int>(state.trials.size())) {
      throw std::runtime_error(path + ": line " + std::to_string(line_number) +
                               ": non-contiguous trial index");
    }
    state.trials.push_back(std::move(trial));
  }
  return state;
}

StudyState run_study(const Objective& objective, const TpeConfig& cfg,
                     const std::string& journal_path) {
  if (cfg.dimension < 1) throw std::invalid_argument("run_study: dimension < 1");
  if (!(cfg.upper > cfg.lower)) {
    throw std::invalid_argument("run_study: empty bounds");
  }

  StudyState state;
  if (!journal_path.empty()) {
    state = load_study_journal(journal_path, cfg);
  }

  auto record = [&](Trial trial) {
    state.trials.push_back(std::move(trial));
    write_journal(state, journal_path);
  };

  // Random startup phase: parameter vectors depend only on (seed, index),
  // so evaluations may run concurrently and resume is exact.
  const int startup_end = std::min(cfg.budget, cfg.startup_trials);
  int next = static_cast<int>(state.trials.size());
  const int chunk = std::max(1, cfg.parallelism);
  while (next < startup_end) {
    const int batch_end = std::min(startup_end, next + chunk);
    std::vector<std::future<std::pair<double, double>>> futures;
    std::vector<Eigen::VectorXd> params_batch;
    for (int idx = next; idx < batch_end; ++idx) {
      params_batch.push_back(startup_params(cfg, idx));
    }
    for (int idx = next; idx < batch_end; ++idx) {
      const Eigen::VectorXd& params =
          params_batch[static_cast<std::size_t>(idx - next)];
      futures.push_back(std::async(
          batch_end - next > 1 ? std::launch::async : std::launch::deferred,
          [&objective, &params, idx] {
            double wall = 0.0;
            const double value =
                evaluate_objective(objective, params, idx, &wall);
            return std::make_pair(value, wall);
          }));
    }
    for (int idx = next; idx < batch_end; ++idx) {
      const auto [value, wall] =
          futures[static_cast<std::size_t>(idx - next)].get();
      Trial trial;
      trial.index = idx;
      trial.params = params_batch[static_cast<std::size_t>(idx - next)];
      trial.failed = !std::isfinite(value);
      trial.loss = trial.failed ? penalty_loss(state) : value;
      trial.wall_seconds = wall;
      record(std::move(trial));
    }
    next = batch_end;
  }

  // Model-guided phase: every suggestion depends on all completed trials.
  for (int idx = next; idx < cfg.budget; ++idx) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(idx)));
    Trial trial;
    trial.index = idx;
    trial.params = (idx == 0 && cfg.include_zero_baseline)
                       ? Eigen::VectorXd::Zero(cfg.dimension)
                       : tpe_suggest(state, cfg, rng);
    double wall = 0.0;
    const double value = evaluate_objective(objective, trial.params, idx, &wall);
    trial.failed = !std::isfinite(value);
    trial.loss = trial.failed ? penalty_loss(state) : value;
    trial.wall_seconds = wall;
    record(std::move(trial));
  }
  return state;
}

MlpPair decode_params(const Eigen::VectorXd& v) {
  constexpr int kN = MlpWeights::kParamCount;
  if (v.size() != 2 * kN) {
    throw std::invalid_argument("decode_params: expected " +
                                std::to_string(2 * kN) + " values");
  }
  MlpPair pair;
  pair.conversion.params = v.head<kN>();
  pair.eigenvalue.params = v.tail<kN>();
  return pair;
}

Eigen::VectorXd encode_params(const MlpPair& pair) {
  constexpr int kN = MlpWeights::kParamCount;
  Eigen::VectorXd v(2 * kN);
  v.head<kN>() = pair.conversion.params;
  v.tail<kN>() = pair.eigenvalue.params;
  return v;
}

TrainResult train(const std::vector<TrainingSequence>& dataset,
                  const OdometryConfig& odo_cfg, const TpeConfig& tpe_cfg,
                  const RteOptions& loss_options,
                  const std::string& journal_path) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (tpe_cfg.dimension != 2 * MlpWeights::kParamCount) {
    throw std::invalid_argument("train: dimension must be 86");
  }

  std::vector<PreparedSequence> prepared;
  prepared.reserve(dataset.size());
  for (const TrainingSequence& seq : dataset) {
    if (seq.scans.count != seq.ground_truth.size()) {
      throw std::invalid_argument("train: scan/ground-truth length mismatch");
    }
    prepared.push_back(prepare_sequence(seq.scans, odo_cfg));
  }

  Objective objective = [&](const Eigen::VectorXd& params, int) {
    OdometryConfig cfg = odo_cfg;
    cfg.mlp = decode_params(params);
    double total = 0.0;
    for (std::size_t s = 0; s < dataset.size(); ++s) {
      const OdometryResult result = run_prepared(prepared[s], cfg);
      total += rte_loss(dataset[s].ground_truth, result.trajectory,
                        loss_options);
    }
    return total / static_cast<double>(dataset.size());
  };

  TrainResult result;
  result.study = run_study(objective, tpe_cfg, journal_path);
  const int best = result.study.best_index();
  if (best < 0) throw std::runtime_error("train: no completed trials");
  result.best =
      decode_params(result.study.trials[static_cast<std::size_t>(best)].params);
  return result;
}

}  // namespace gloam

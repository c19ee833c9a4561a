// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gloam/evaluation.hpp"
#include "gloam/mlp.hpp"
#include "gloam/odometry.hpp"
#include "gloam/rng.hpp"

namespace gloam {

struct Trial {
  int index = -1;
  Eigen::VectorXd params;
  double loss = 0.0;
  bool failed = false;
  double wall_seconds = 0.0;  // in-memory only, not journaled
};

struct TpeConfig {
  int dimension = 2 * MlpWeights::kParamCount;
  double lower = -3.0;
  double upper = 3.0;
  int startup_trials = 30;
  double gamma = 0.25;
  int candidates = 24;
  double min_bandwidth = 1e-3;
  int budget = 300;
  std::uint64_t seed = 0;
  // Concurrent trial evaluations during the random startup phase; model-
  // guided trials are serialized through the study state.
  int parallelism = 1;
  // Evaluate the all-zero parameter vector as trial 0.
  bool include_zero_baseline = true;
};

struct StudyState {
  std::vector<Trial> trials;

  // Lowest loss, earliest trial on ties; -1 when empty.
  int best_index() const;
};

// One TPE suggestion. Below the startup count the draw is uniform in
// bounds; afterwards trials split at the gamma quantile into good/bad
// Parzen densities per dimension, candidates are drawn from the good
// density (with a 1:|set| uniform-prior mixture) and scored by the
// good/bad density ratio.
Eigen::VectorXd tpe_suggest(const StudyState& state, const TpeConfig& cfg,
                            Rng& rng);

// Objective value for a parameter vector; non-finite results and thrown
// exceptions mark the trial failed.
using Objective = std::function<double(const Eigen::VectorXd&, int trial_index)>;

// Runs (or resumes) a study. The journal holds one line per trial —
// index, parameters, loss, status — and is rewritten atomically after
// every completed trial; an empty journal path disables persistence.
// Failed trials record a penalty loss of max(1e3, 10 * worst successful
// loss so far).
StudyState run_study(const Objective& objective, const TpeConfig& cfg,
                     const std::string& journal_path);

StudyState load_study_journal(const std::string& path, const TpeConfig& cfg);

// First 43 entries are the conversion MLP, last 43 the eigenvalue MLP.
MlpPair decode_params(const Eigen::VectorXd& v);
Eigen::VectorXd encode_params(const MlpPair& pair);

struct TrainingSequence {
  ScanSource scans;
  Trajectory ground_truth;
};

struct TrainResult {
  MlpPair best;
  StudyState study;
};

// Closed-loop training: each trial decodes an MlpPair, runs odometry on
// every sequence (preparation shared across trials), and scores the mean
// rte_loss against ground truth.
TrainResult train(const std::vector<TrainingSequence>& dataset,
                  const OdometryConfig& odo_cfg, const TpeConfig& tpe_cfg,
                  const RteOptions& loss_options,
                  const std::string& journal_path);

}  // namespace gloam

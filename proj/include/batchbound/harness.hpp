#pragma once

// Experiment orchestration: configuration files, one-game sessions against an
// adversary or a fixed instance, grading, report emission, the sweep engine,
// and the verification suites behind `verify`.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "batchbound/adversary.hpp"
#include "batchbound/mdp.hpp"
#include "batchbound/packing.hpp"
#include "batchbound/protocol.hpp"
#include "json.hpp"

namespace batchbound {

enum class QueryMode { kPolicyFree, kPolicyInduced };
enum class SessionMode { kMultiBatch, kFullyAdaptive, kFixedInstance };
enum class Outcome { kLearnerSound, kIndistinguishable, kAdversaryDefeated };

struct ExperimentConfig {
  int d = 4;
  double gamma = 0.9;
  int K = 1;
  std::vector<int> n_per_round{1};
  Family problem = Family::PE;
  QueryMode query_mode = QueryMode::kPolicyFree;
  std::string learner_kind = "random_unit";
  SessionMode adversary_mode = SessionMode::kMultiBatch;
  std::uint64_t seed = 0;
  std::string output_dir;  // empty: write no files

  void validate() const;  // ConfigError with a field-level message
  bool operator==(const ExperimentConfig&) const = default;
};

// Parse a config object, then apply the BATCHBOUND_SEED and BATCHBOUND_OUT
// environment overrides when they are set. Report parsing disables the
// overrides so an echoed config reads back exactly as written.
ExperimentConfig config_from_json(const nlohmann::json& j, bool apply_env_overrides = true);
nlohmann::json config_to_json(const ExperimentConfig& c);

struct GameTimings {
  double play_s = 0.0;
  double grade_s = 0.0;
  double total_s = 0.0;
  bool operator==(const GameTimings&) const = default;
};

struct GameReport {
  ExperimentConfig config;
  Outcome outcome = Outcome::kIndistinguishable;
  double q_gap = 0.0;      // NaN unless the adversary survived to a certificate
  double max_error = 0.0;  // worst graded PE error / BPI suboptimality
  int defeat_round = 0;    // 0 unless the adversary was defeated
  int n_total = 0;
  BudgetReport budget;
  GameTimings timings;
};

// NaN-tolerant field equality (q_gap and k_threshold may be NaN).
bool operator==(const GameReport& a, const GameReport& b);

nlohmann::json report_to_json(const GameReport& r);
GameReport report_from_json(const nlohmann::json& j);

// Outputs below one are sound at the indistinguishability scale: a surviving
// adversary forces error exactly one at +-w, so grading uses eps = 1.
inline constexpr double kGradeEps = 1.0;

// Play one game: build the learner and the environment, run the protocol,
// grade the output against every instance the session could have been (the
// certificate pair, the defeat commitment, or the fixed instance), and write
// transcript/certificate/report files when output_dir is set.
GameReport run_game(const ExperimentConfig& config);

struct SweepGrid {
  std::vector<int> ds;
  std::vector<int> Ks;
  std::vector<int> ns;  // per-round batch size, repeated K times
};

// CSV text: "schema_version=1" line, a header row, then one row per grid cell
// in (d, K, n) lexicographic order. Cells run on up to `jobs` threads; the
// row order and every cell seed are independent of the thread schedule.
std::string run_sweep(const ExperimentConfig& base, const SweepGrid& grid, int jobs);

struct SuiteResult {
  bool pass = false;
  int cases = 0;
  double worst = 0.0;  // suite-specific worst statistic over all cases
  std::string detail;
};

// Bellman-residual check over random committed instances: `per_cell`
// instances for each (family, sign) combination, cycling through ds x gammas,
// each verified on `samples` stratified state-actions at 1e-9.
SuiteResult realizability_suite(int per_cell, const std::vector<int>& ds,
                                const std::vector<double>& gammas, int samples,
                                std::uint64_t seed);

// Chordal distance against the closed-form line angle on `pairs` random line
// pairs (agreement 1e-6), plus sector membership against grid maximization of
// the cosine over subspaces of dimension <= 2 with `grid_points` per case.
SuiteResult geometry_equivalence_suite(int pairs, int sector_cases, int grid_points,
                                       std::uint64_t seed);

// Random verified packings with one more member than there are queries: the
// selected member must contain no query in its sector, every time.
SuiteResult packing_pigeonhole_suite(int configs, std::uint64_t seed);

}  // namespace batchbound

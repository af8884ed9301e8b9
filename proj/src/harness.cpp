#include "batchbound/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <thread>
#include <utility>

#include "batchbound/errors.hpp"
#include "batchbound/io.hpp"
#include "batchbound/learner.hpp"
#include "batchbound/rng.hpp"

namespace batchbound {

namespace {

const char* family_name(Family f) { return f == Family::PE ? "PE" : "BPI"; }

Family family_from(const std::string& s) {
  if (s == "PE") return Family::PE;
  if (s == "BPI") return Family::BPI;
  throw ConfigError("problem must be PE or BPI, got \"" + s + "\"");
}

const char* query_mode_name(QueryMode m) {
  return m == QueryMode::kPolicyFree ? "policy_free" : "policy_induced";
}

QueryMode query_mode_from(const std::string& s) {
  if (s == "policy_free") return QueryMode::kPolicyFree;
  if (s == "policy_induced") return QueryMode::kPolicyInduced;
  throw ConfigError("query_mode must be policy_free or policy_induced, got \"" + s + "\"");
}

const char* session_mode_name(SessionMode m) {
  switch (m) {
    case SessionMode::kMultiBatch: return "multi_batch";
    case SessionMode::kFullyAdaptive: return "fully_adaptive";
    default: return "fixed_instance";
  }
}

SessionMode session_mode_from(const std::string& s) {
  if (s == "multi_batch") return SessionMode::kMultiBatch;
  if (s == "fully_adaptive") return SessionMode::kFullyAdaptive;
  if (s == "fixed_instance") return SessionMode::kFixedInstance;
  throw ConfigError("adversary_mode must be multi_batch, fully_adaptive, or fixed_instance");
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::kLearnerSound: return "learner_sound";
    case Outcome::kIndistinguishable: return "indistinguishable";
    default: return "adversary_defeated";
  }
}

Outcome outcome_from(const std::string& s) {
  if (s == "learner_sound") return Outcome::kLearnerSound;
  if (s == "indistinguishable") return Outcome::kIndistinguishable;
  if (s == "adversary_defeated") return Outcome::kAdversaryDefeated;
  throw ConfigError("unknown outcome \"" + s + "\"");
}

// Equal, or both NaN. Report fields that may legitimately be NaN must still
// compare equal after a file round trip.
bool same_double(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

double double_or_nan(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  return v.is_null() ? std::nan("") : v.get<double>();
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (d < 2) throw ConfigError("config.d must be >= 2");
  if (!(gamma > std::sqrt(3.0 / 4.0) && gamma < 1.0))
    throw ConfigError("config.gamma must lie in (sqrt(3/4), 1)");
  if (K < 1) throw ConfigError("config.K must be >= 1");
  if (static_cast<int>(n_per_round.size()) != K)
    throw ConfigError("config.n_per_round must list exactly K batch sizes");
  for (int n : n_per_round)
    if (n < 1) throw ConfigError("config.n_per_round entries must be >= 1");
  const bool known = learner_kind == "exact_solver" || learner_kind == "random_unit" ||
                     learner_kind == "coordinate" || learner_kind == "greedy_orthogonal" ||
                     learner_kind == "policy_probe";
  if (!known) throw ConfigError("config.learner_kind \"" + learner_kind + "\" is not recognized");
  if ((learner_kind == "exact_solver" || learner_kind == "policy_probe") && problem != Family::PE)
    throw ConfigError("config.learner_kind " + learner_kind + " requires problem PE");
  if (query_mode == QueryMode::kPolicyInduced) {
    if (problem != Family::PE)
      throw ConfigError("config.query_mode policy_induced requires problem PE");
    if (learner_kind != "policy_probe")
      throw ConfigError("config.query_mode policy_induced requires the policy_probe learner");
  }
}

ExperimentConfig config_from_json(const nlohmann::json& j, bool apply_env_overrides) {
  ExperimentConfig c;
  try {
    c.d = j.at("d").get<int>();
    c.gamma = j.at("gamma").get<double>();
    c.K = j.at("K").get<int>();
    c.n_per_round = j.at("n_per_round").get<std::vector<int>>();
    c.problem = family_from(j.at("problem").get<std::string>());
    if (j.contains("query_mode")) c.query_mode = query_mode_from(j["query_mode"].get<std::string>());
    if (j.contains("learner_kind")) c.learner_kind = j["learner_kind"].get<std::string>();
    if (j.contains("adversary_mode"))
      c.adversary_mode = session_mode_from(j["adversary_mode"].get<std::string>());
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!apply_env_overrides) return c;
  if (const char* env_seed = std::getenv("BATCHBOUND_SEED")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env_seed, &end, 10);
    if (end == env_seed || *end != '\0')
      throw ConfigError("BATCHBOUND_SEED is not an unsigned integer");
    c.seed = v;
  }
  if (const char* env_out = std::getenv("BATCHBOUND_OUT")) c.output_dir = env_out;
  return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  return nlohmann::json{{"d", c.d},
                        {"gamma", c.gamma},
                        {"K", c.K},
                        {"n_per_round", c.n_per_round},
                        {"problem", family_name(c.problem)},
                        {"query_mode", query_mode_name(c.query_mode)},
                        {"learner_kind", c.learner_kind},
                        {"adversary_mode", session_mode_name(c.adversary_mode)},
                        {"seed", c.seed},
                        {"output_dir", c.output_dir}};
}

bool operator==(const GameReport& a, const GameReport& b) {
  return a.config == b.config && a.outcome == b.outcome && same_double(a.q_gap, b.q_gap) &&
         same_double(a.max_error, b.max_error) && a.defeat_round == b.defeat_round &&
         a.n_total == b.n_total && a.budget.d == b.budget.d && a.budget.d_plus == b.budget.d_plus &&
         a.budget.K == b.budget.K && a.budget.gamma == b.budget.gamma &&
         a.budget.g == b.budget.g && a.budget.per_round_caps == b.budget.per_round_caps &&
         same_double(a.budget.W, b.budget.W) &&
         same_double(a.budget.k_threshold, b.budget.k_threshold) && a.timings == b.timings;
}

nlohmann::json report_to_json(const GameReport& r) {
  return nlohmann::json{
      {"config", config_to_json(r.config)},
      {"outcome", outcome_name(r.outcome)},
      {"q_gap", r.q_gap},
      {"max_error", r.max_error},
      {"defeat_round", r.defeat_round},
      {"n_total", r.n_total},
      {"budget",
       {{"d", r.budget.d},
        {"d_plus", r.budget.d_plus},
        {"K", r.budget.K},
        {"gamma", r.budget.gamma},
        {"g", r.budget.g},
        {"per_round_caps", r.budget.per_round_caps},
        {"W", r.budget.W},
        {"k_threshold", r.budget.k_threshold}}},
      {"timings",
       {{"play_s", r.timings.play_s},
        {"grade_s", r.timings.grade_s},
        {"total_s", r.timings.total_s}}}};
}

GameReport report_from_json(const nlohmann::json& j) {
  try {
    GameReport r;
    r.config = config_from_json(j.at("config"), /*apply_env_overrides=*/false);
    r.outcome = outcome_from(j.at("outcome").get<std::string>());
    r.q_gap = double_or_nan(j, "q_gap");
    r.max_error = double_or_nan(j, "max_error");
    r.defeat_round = j.at("defeat_round").get<int>();
    r.n_total = j.at("n_total").get<int>();
    const auto& b = j.at("budget");
    r.budget.d = b.at("d").get<std::int64_t>();
    r.budget.d_plus = b.at("d_plus").get<std::int64_t>();
    r.budget.K = b.at("K").get<int>();
    r.budget.gamma = b.at("gamma").get<double>();
    r.budget.g = b.at("g").get<double>();
    r.budget.per_round_caps = b.at("per_round_caps").get<std::vector<double>>();
    r.budget.W = double_or_nan(b, "W");
    r.budget.k_threshold = double_or_nan(b, "k_threshold");
    const auto& t = j.at("timings");
    r.timings.play_s = t.at("play_s").get<double>();
    r.timings.grade_s = t.at("grade_s").get<double>();
    r.timings.total_s = t.at("total_s").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report: ") + e.what());
  }
}

namespace {

// Sign pair built around an already committed instance: valid only when both
// signs reproduce the transcript bit for bit, i.e. no record revealed the
// sign. For surviving adversaries this always succeeds; for defeats and fixed
// instances it succeeds exactly when the learner never reached a cap.
std::optional<IndistinguishabilityCertificate> mirror_certificate(const HardInstance& inst,
                                                                  const Transcript& t) {
  IndistinguishabilityCertificate cert{inst, inst, t, 0.0, false};
  cert.instance_plus.sign = +1;
  cert.instance_minus.sign = -1;
  if (!replay_matches(cert.instance_plus, t) || !replay_matches(cert.instance_minus, t))
    return std::nullopt;
  cert.replay_match = true;
  const StateAction probe{State::start(inst.d()), BallVector(inst.w())};
  cert.q_gap = std::abs(true_q(cert.instance_plus, probe) - true_q(cert.instance_minus, probe));
  return cert;
}

double grade_output(const ExperimentConfig& config, const LearnerOutput& output,
                    const std::vector<const HardInstance*>& against) {
  double worst = 0.0;
  if (config.problem == Family::PE) {
    auto qhat = [&](const BallVector& a) {
      return output.theta ? output.theta->dot(a.coords()) : 0.0;
    };
    std::vector<BallVector> probes{BallVector(against.front()->w()),
                                   BallVector(-against.front()->w())};
    auto eng = make_engine(config.seed, 3);
    for (int i = 0; i < 16; ++i) probes.push_back(BallVector(random_ball_point(config.d, eng)));
    for (const HardInstance* inst : against)
      worst = std::max(worst,
                       evaluate_pe_soundness(*inst, qhat, kGradeEps, probes).max_error);
  } else {
    if (!output.first_action) throw ConfigError("BPI learner returned no first action");
    for (const HardInstance* inst : against)
      worst = std::max(
          worst, evaluate_bpi_soundness(*inst, *output.first_action, kGradeEps).suboptimality);
  }
  return worst;
}

int first_rewarded_round(const Transcript& t) {
  for (const Transcript::Entry& e : t.batches)
    for (const FeedbackRecord& r : e.records)
      if (r.reward != 0.0) return e.batch.round;
  return 0;
}

}  // namespace

GameReport run_game(const ExperimentConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  auto seconds_since = [](std::chrono::steady_clock::time_point from) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - from).count();
  };

  GameReport rep;
  rep.config = config;
  rep.q_gap = std::nan("");

  auto learner = make_learner(config.learner_kind, config.problem, config.d, config.gamma,
                              config.n_per_round, mix_seed(config.seed, 1),
                              config.query_mode == QueryMode::kPolicyInduced);

  std::unique_ptr<Environment> env;
  AdversaryEnvironment* adv = nullptr;
  std::optional<HardInstance> fixed;
  if (config.adversary_mode == SessionMode::kFixedInstance) {
    const int sign = config.seed % 2 == 0 ? +1 : -1;
    const int depth = std::max(1, std::min(config.K, config.d - 1));
    fixed = random_hard_instance(config.problem, config.d, config.gamma, sign, depth,
                                 mix_seed(config.seed, 2));
    env = std::make_unique<FixedInstanceEnvironment>(*fixed);
  } else {
    const AdversaryMode mode = config.adversary_mode == SessionMode::kFullyAdaptive
                                   ? AdversaryMode::kFullyAdaptive
                                   : AdversaryMode::kMultiBatch;
    auto owned = std::make_unique<AdversaryEnvironment>(
        make_adversary(config.problem, config.d, config.gamma, config.K, mode, false,
                       mix_seed(config.seed, 2)));
    adv = owned.get();
    env = std::move(owned);
  }

  ProtocolResult result = run_protocol(*env, *learner, config.K, config.problem);
  rep.n_total = result.transcript.n_total;
  rep.timings.play_s = seconds_since(t0);

  // The instances this session could have been. A surviving adversary yields
  // the certified sign pair; otherwise the single known instance, widened to
  // its mirror whenever the transcript never revealed the sign.
  const auto tg = std::chrono::steady_clock::now();
  std::optional<IndistinguishabilityCertificate> cert;
  const HardInstance* actual = nullptr;
  if (adv == nullptr) {
    actual = &*fixed;
    cert = mirror_certificate(*fixed, result.transcript);
  } else if (adv->defeated()) {
    rep.defeat_round = adv->defeat_round();
    actual = &adv->committed_instance();
    cert = mirror_certificate(*actual, result.transcript);
  } else {
    cert = adv->certificate();
  }

  std::vector<const HardInstance*> against;
  if (cert)
    against = {&cert->instance_plus, &cert->instance_minus};
  else
    against = {actual};
  rep.max_error = grade_output(config, result.output, against);
  rep.timings.grade_s = seconds_since(tg);

  if (rep.max_error < kGradeEps) {
    rep.outcome = Outcome::kLearnerSound;
  } else if (cert) {
    rep.outcome = Outcome::kIndistinguishable;
    rep.q_gap = cert->q_gap;
  } else {
    // The sign was revealed and the learner still failed.
    rep.outcome = Outcome::kAdversaryDefeated;
    if (rep.defeat_round == 0) rep.defeat_round = first_rewarded_round(result.transcript);
  }

  rep.budget = budget_report(config.d, config.K, config.gamma,
                             static_cast<double>(rep.n_total));
  rep.timings.total_s = seconds_since(t0);

  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
    const std::filesystem::path dir(config.output_dir);
    write_text_file((dir / "transcript.jsonl").string(),
                    transcript_to_jsonl(result.transcript));
    if (cert)
      write_text_file((dir / "certificate.json").string(),
                      certificate_to_json(*cert).dump(2) + "\n");
    write_text_file((dir / "report.json").string(), report_to_json(rep).dump(2) + "\n");
  }
  return rep;
}

std::string run_sweep(const ExperimentConfig& base, const SweepGrid& grid, int jobs) {
  if (grid.ds.empty() || grid.Ks.empty() || grid.ns.empty())
    throw ConfigError("sweep grid must list at least one d, K, and n");

  struct Cell {
    ExperimentConfig config;
    GameReport report;
  };
  std::vector<Cell> cells;
  for (int d : grid.ds)
    for (int K : grid.Ks)
      for (int n : grid.ns) {
        ExperimentConfig c = base;
        c.d = d;
        c.K = K;
        c.n_per_round.assign(static_cast<std::size_t>(K), n);
        c.seed = mix_seed(base.seed, cells.size());
        c.output_dir.clear();
        c.validate();
        cells.push_back(Cell{std::move(c), GameReport{}});
      }

  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(cells.size());
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
      try {
        cells[i].report = run_game(cells[i].config);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  std::string csv = "schema_version=1\n";
  csv += "d,K,n,learner,adversary,problem,seed,outcome,q_gap,max_error,n_total\n";
  for (const Cell& cell : cells) {
    const GameReport& r = cell.report;
    csv += std::to_string(r.config.d) + ',' + std::to_string(r.config.K) + ',' +
           std::to_string(r.config.n_per_round.front()) + ',' + r.config.learner_kind + ',' +
           session_mode_name(r.config.adversary_mode) + ',' + family_name(r.config.problem) +
           ',' + std::to_string(r.config.seed) + ',' + outcome_name(r.outcome) + ',' +
           fmt_double(r.q_gap) + ',' + fmt_double(r.max_error) + ',' +
           std::to_string(r.n_total) + '\n';
  }
  return csv;
}

SuiteResult realizability_suite(int per_cell, const std::vector<int>& ds,
                                const std::vector<double>& gammas, int samples,
                                std::uint64_t seed) {
  if (per_cell < 1 || ds.empty() || gammas.empty() || samples < 1)
    throw ConfigError("realizability_suite: need per_cell >= 1, samples >= 1, nonempty grids");
  SuiteResult res;
  res.pass = true;
  std::uint64_t idx = 0;
  for (Family family : {Family::PE, Family::BPI})
    for (int sign : {+1, -1})
      for (int i = 0; i < per_cell; ++i, ++idx) {
        const int d = ds[idx % ds.size()];
        const double gamma = gammas[(idx / ds.size()) % gammas.size()];
        const int depth = 1 + static_cast<int>(idx) % std::max(1, std::min(3, d - 1));
        HardInstance inst =
            random_hard_instance(family, d, gamma, sign, depth, mix_seed(seed, idx));
        RealizabilityReport rep =
            verify_realizability(inst, samples, mix_seed(seed, 100000 + idx));
        res.worst = std::max(res.worst, rep.max_residual);
        if (!rep.pass) res.pass = false;
        ++res.cases;
      }
  res.detail = "max Bellman residual " + fmt_double(res.worst) + " over " +
               std::to_string(res.cases) + " instances";
  return res;
}

SuiteResult geometry_equivalence_suite(int pairs, int sector_cases, int grid_points,
                                       std::uint64_t seed) {
  if (pairs < 1 || sector_cases < 1 || grid_points < 4)
    throw ConfigError("geometry_equivalence_suite: need pairs, cases, and a usable grid");
  SuiteResult res;
  res.pass = true;

  // Lines: chordal distance against the closed-form sine of the angle.
  auto eng = make_engine(seed, 1);
  for (int i = 0; i < pairs; ++i) {
    const int d = 2 + i % 7;
    const Eigen::VectorXd u = random_unit_vector(d, eng);
    const Eigen::VectorXd v = random_unit_vector(d, eng);
    const double c = std::min(1.0, std::abs(u.dot(v)));
    const double closed = std::sqrt(std::max(0.0, 1.0 - c * c));
    const double got = chordal_distance(Subspace::line(u), Subspace::line(v));
    res.worst = std::max(res.worst, std::abs(got - closed));
    ++res.cases;
  }
  if (res.worst > 1e-6) res.pass = false;

  // Sector membership against grid maximization of the cosine over the
  // subspace, dim <= 2. Cases within 1e-6 of the threshold are resampled so
  // the grid resolution cannot flip the verdict.
  const double step = M_PI / grid_points;
  const double cd = std::cos(step), sd = std::sin(step);
  static const double kGammas[3] = {0.87, 0.9, 0.95};
  int mismatches = 0;
  for (int j = 0; j < sector_cases; ++j) {
    const int d = 2 + j % 5;
    const int h = 1 + j % 2;
    const double gamma = kGammas[j % 3];
    Eigen::MatrixXd raw(d, h);
    for (int c = 0; c < h; ++c) raw.col(c) = gaussian_vector(d, eng);
    const Eigen::MatrixXd basis =
        Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ() *
        Eigen::MatrixXd::Identity(d, h);
    const Subspace H = Subspace::from_orthonormal(basis);

    double gridmax = 0.0;
    Eigen::VectorXd x(d);
    for (int attempt = 0;; ++attempt) {
      if (attempt > 200) throw InvariantBreach("geometry suite: cannot find an off-margin point");
      x = random_ball_point(d, eng);
      if (x.norm() <= 1e-6) continue;
      const double c1 = basis.col(0).dot(x) / x.norm();
      const double c2 = h == 2 ? basis.col(1).dot(x) / x.norm() : 0.0;
      gridmax = 0.0;
      double ct = 1.0, st = 0.0;  // walks cos/sin across the grid
      for (int k = 0; k < grid_points; ++k) {
        gridmax = std::max(gridmax, std::abs(c1 * ct + c2 * st));
        const double nct = ct * cd - st * sd;
        st = st * cd + ct * sd;
        ct = nct;
      }
      if (std::abs(gridmax - gamma) > 1e-6) break;
    }
    if ((gridmax > gamma) != sector_contains(H, gamma, x)) ++mismatches;
    ++res.cases;
  }
  if (mismatches > 0) res.pass = false;
  res.detail = "worst line deviation " + fmt_double(res.worst) + ", " +
               std::to_string(mismatches) + " sector mismatches over " +
               std::to_string(res.cases) + " cases";
  return res;
}

SuiteResult packing_pigeonhole_suite(int configs, std::uint64_t seed) {
  if (configs < 1) throw ConfigError("packing_pigeonhole_suite: need at least one config");
  SuiteResult res;
  res.pass = true;
  int violations = 0;
  for (int i = 0; i < configs; ++i) {
    auto eng = make_engine(seed, static_cast<std::uint64_t>(i));
    const int d = 3 + i % 6;
    int m = 1 + i % 2;
    if (2 * m > d) m = 1;
    static const double kGammas[3] = {0.87, 0.9, 0.95};
    const double gamma = kGammas[i % 3];
    const double g = g_of_gamma(gamma);
    const int want = 2 + i % 3;

    Packing p;
    p.d = d;
    p.m = m;
    p.gamma = gamma;
    int attempts = 0;
    while (static_cast<int>(p.members.size()) < want && attempts < 2000) {
      ++attempts;
      Eigen::MatrixXd raw(d, m);
      for (int c = 0; c < m; ++c) raw.col(c) = gaussian_vector(d, eng);
      const Eigen::MatrixXd basis =
          Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ() *
          Eigen::MatrixXd::Identity(d, m);
      bool ok = true;
      for (const Subspace& other : p.members) {
        const Eigen::MatrixXd overlap = basis.transpose() * other.basis();
        const double cos1 = overlap.jacobiSvd().singularValues()(0);
        if (cos1 >= g - 1e-9) {
          ok = false;
          break;
        }
      }
      if (ok) p.members.push_back(Subspace::from_orthonormal(basis));
    }
    if (p.members.size() < 2) continue;  // could not pack this cell, try the next
    p.validate();

    std::vector<Eigen::VectorXd> queries;
    while (queries.size() + 1 < p.members.size()) {
      Eigen::VectorXd q = random_ball_point(d, eng);
      if (q.norm() > 1e-6) queries.push_back(std::move(q));
    }
    const Subspace chosen = pigeonhole_select(p, queries);
    for (const Eigen::VectorXd& q : queries)
      if (sector_contains(chosen, gamma, q)) ++violations;
    ++res.cases;
  }
  if (violations > 0 || res.cases == 0) res.pass = false;
  res.worst = violations;
  res.detail = std::to_string(violations) + " sector violations over " +
               std::to_string(res.cases) + " packed configs";
  return res;
}

}  // namespace batchbound

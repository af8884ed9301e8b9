// Command-line surface: one-game sessions, sweeps, verification suites, and
// file-level checks for packings, instances, and budgets.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "batchbound/adversary.hpp"
#include "batchbound/errors.hpp"
#include "batchbound/harness.hpp"
#include "batchbound/io.hpp"
#include "batchbound/learner.hpp"
#include "batchbound/mdp.hpp"
#include "batchbound/packing.hpp"
#include "batchbound/rng.hpp"
#include "json.hpp"

namespace {

using namespace batchbound;

nlohmann::json parse_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

nlohmann::json budget_to_json(const BudgetReport& b) {
  return nlohmann::json{{"d", b.d},
                        {"d_plus", b.d_plus},
                        {"K", b.K},
                        {"gamma", b.gamma},
                        {"g", b.g},
                        {"per_round_caps", b.per_round_caps},
                        {"W", b.W},
                        {"k_threshold", b.k_threshold}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hard-instance simulator for batched query protocols"};
  app.require_subcommand(1);
  int rc = 0;

  // simulate
  std::string sim_config;
  CLI::App* sim = app.add_subcommand("simulate", "play one graded session from a config file");
  sim->add_option("--config", sim_config, "JSON experiment config")->required();
  sim->callback([&] {
    GameReport rep = run_game(config_from_json(parse_json_file(sim_config)));
    std::cout << report_to_json(rep).dump(2) << "\n";
  });

  // sweep
  std::string sweep_config, sweep_out;
  std::vector<int> sweep_ds, sweep_Ks, sweep_ns;
  int sweep_jobs = std::max(1u, std::thread::hardware_concurrency());
  CLI::App* sweep = app.add_subcommand("sweep", "grade a d x K x n grid and emit CSV");
  sweep->add_option("--config", sweep_config, "base JSON config, defaults applied otherwise");
  sweep->add_option("--d", sweep_ds, "ambient dimensions")->required()->delimiter(',');
  sweep->add_option("--K", sweep_Ks, "round counts")->required()->delimiter(',');
  sweep->add_option("--n", sweep_ns, "per-round batch sizes")->required()->delimiter(',');
  sweep->add_option("--jobs", sweep_jobs, "worker threads");
  sweep->add_option("--out", sweep_out, "write CSV here instead of stdout");
  sweep->callback([&] {
    ExperimentConfig base;
    if (!sweep_config.empty()) base = config_from_json(parse_json_file(sweep_config));
    const std::string csv = run_sweep(base, SweepGrid{sweep_ds, sweep_Ks, sweep_ns}, sweep_jobs);
    if (sweep_out.empty())
      std::cout << csv;
    else
      write_text_file(sweep_out, csv);
  });

  // verify {realizability, geometry, packing}
  CLI::App* verify = app.add_subcommand("verify", "run a property suite");
  verify->require_subcommand(1);
  auto report_suite = [&rc](const SuiteResult& res) {
    std::cout << (res.pass ? "pass" : "FAIL") << ": " << res.detail << "\n";
    if (!res.pass) rc = 1;
  };

  int real_per_cell = 25, real_samples = 1000;
  std::vector<int> real_ds{3, 4, 5, 6};
  std::vector<double> real_gammas{0.87, 0.9, 0.95};
  std::uint64_t real_seed = 0;
  CLI::App* vreal = verify->add_subcommand("realizability", "Bellman residuals on random instances");
  vreal->add_option("--per-cell", real_per_cell, "instances per family x sign cell");
  vreal->add_option("--d", real_ds, "dimension cycle")->delimiter(',');
  vreal->add_option("--gamma", real_gammas, "discount cycle")->delimiter(',');
  vreal->add_option("--samples", real_samples, "state-action samples per instance");
  vreal->add_option("--seed", real_seed, "base seed");
  vreal->callback([&] {
    report_suite(realizability_suite(real_per_cell, real_ds, real_gammas, real_samples, real_seed));
  });

  int geo_pairs = 10000, geo_cases = 200, geo_grid = 100000;
  std::uint64_t geo_seed = 0;
  CLI::App* vgeo = verify->add_subcommand("geometry", "chordal closed form and sector membership");
  vgeo->add_option("--pairs", geo_pairs, "random line pairs");
  vgeo->add_option("--cases", geo_cases, "sector membership cases");
  vgeo->add_option("--grid", geo_grid, "grid points per sector case");
  vgeo->add_option("--seed", geo_seed, "base seed");
  vgeo->callback([&] { report_suite(geometry_equivalence_suite(geo_pairs, geo_cases, geo_grid, geo_seed)); });

  int pack_configs = 1000;
  std::uint64_t pack_seed = 0;
  CLI::App* vpack = verify->add_subcommand("packing", "pigeonhole selection on random packings");
  vpack->add_option("--configs", pack_configs, "random packing configurations");
  vpack->add_option("--seed", pack_seed, "base seed");
  vpack->callback([&] { report_suite(packing_pigeonhole_suite(pack_configs, pack_seed)); });

  // adversary play
  std::string play_config;
  CLI::App* adversary = app.add_subcommand("adversary", "adversary sessions");
  adversary->require_subcommand(1);
  CLI::App* play = adversary->add_subcommand("play", "run one session, print the transcript");
  play->add_option("--config", play_config, "JSON experiment config")->required();
  play->callback([&] {
    ExperimentConfig c = config_from_json(parse_json_file(play_config));
    c.validate();
    if (c.adversary_mode == SessionMode::kFixedInstance)
      throw ConfigError("adversary play needs an adversarial session, not a fixed instance");
    auto learner = make_learner(c.learner_kind, c.problem, c.d, c.gamma, c.n_per_round,
                                mix_seed(c.seed, 1), c.query_mode == QueryMode::kPolicyInduced);
    const AdversaryMode mode = c.adversary_mode == SessionMode::kFullyAdaptive
                                   ? AdversaryMode::kFullyAdaptive
                                   : AdversaryMode::kMultiBatch;
    AdversaryEnvironment env(
        make_adversary(c.problem, c.d, c.gamma, c.K, mode, false, mix_seed(c.seed, 2)));
    ProtocolResult result = run_protocol(env, *learner, c.K, c.problem);
    const std::string jsonl = transcript_to_jsonl(result.transcript);
    std::cout << jsonl;
    const std::filesystem::path dir = c.output_dir.empty() ? "." : c.output_dir;
    std::filesystem::create_directories(dir);
    if (!c.output_dir.empty()) write_text_file((dir / "transcript.jsonl").string(), jsonl);
    if (env.defeated()) {
      std::cerr << "adversary defeated in round " << env.defeat_round() << ", no certificate\n";
    } else {
      write_text_file((dir / "certificate.json").string(),
                      certificate_to_json(env.certificate()).dump(2) + "\n");
    }
  });

  // learner solve
  std::string solve_env;
  double solve_gamma = std::nan("");
  CLI::App* learner_cmd = app.add_subcommand("learner", "reference learners");
  learner_cmd->require_subcommand(1);
  CLI::App* solve = learner_cmd->add_subcommand("solve", "exact recovery on a stored instance");
  solve->add_option("--env", solve_env, "instance JSON file")->required();
  solve->add_option("--gamma", solve_gamma, "discount assumed by the solver, default the instance's");
  solve->callback([&] {
    HardInstance inst = instance_from_json(parse_json_file(solve_env));
    if (inst.family != Family::PE) throw ConfigError("learner solve requires a PE instance");
    const double gamma = std::isnan(solve_gamma) ? inst.gamma : solve_gamma;
    FixedInstanceEnvironment env(inst);
    ExactSolverLearner solver(inst.d(), gamma);
    ProtocolResult result = run_protocol(env, solver, inst.d(), Family::PE);
    std::cout << nlohmann::json{{"theta", vector_to_json(*result.output.theta)},
                                {"queries", result.transcript.n_total}}
                     .dump(2)
              << "\n";
  });

  // packing verify
  std::string packing_file;
  double packing_dmin = 0.0;
  CLI::App* packing_cmd = app.add_subcommand("packing", "packing file checks");
  packing_cmd->require_subcommand(1);
  CLI::App* pverify = packing_cmd->add_subcommand("verify", "check pairwise chordal separation");
  pverify->add_option("file", packing_file, "packing JSON file")->required();
  pverify->add_option("--dmin", packing_dmin, "required min pairwise chordal distance")->required();
  pverify->callback([&] {
    const PackingCheck chk = verify_packing(packing_from_json(parse_json_file(packing_file)),
                                            packing_dmin);
    nlohmann::json out{{"ok", chk.ok}, {"min_chordal", chk.min_chordal}};
    if (!chk.ok) out["violating_pair"] = {chk.violating_pair.first, chk.violating_pair.second};
    std::cout << out.dump(2) << "\n";
    if (!chk.ok) rc = 1;
  });

  // mdp verify-realizability
  std::string mdp_file;
  int mdp_samples = 1000;
  std::uint64_t mdp_seed = 0;
  CLI::App* mdp_cmd = app.add_subcommand("mdp", "instance file checks");
  mdp_cmd->require_subcommand(1);
  CLI::App* mverify = mdp_cmd->add_subcommand("verify-realizability", "Bellman residual check");
  mverify->add_option("file", mdp_file, "instance JSON file")->required();
  mverify->add_option("--samples", mdp_samples, "stratified state-action samples");
  mverify->add_option("--seed", mdp_seed, "sample seed");
  mverify->callback([&] {
    const RealizabilityReport rep =
        verify_realizability(instance_from_json(parse_json_file(mdp_file)), mdp_samples, mdp_seed);
    std::cout << nlohmann::json{{"max_residual", rep.max_residual},
                                {"pass", rep.pass},
                                {"samples", rep.samples}}
                     .dump(2)
              << "\n";
    if (!rep.pass) rc = 1;
  });

  // bounds
  std::int64_t bounds_d = 0;
  int bounds_K = 0;
  double bounds_gamma = 0.0, bounds_n = std::nan("");
  CLI::App* bounds = app.add_subcommand("bounds", "per-round cap budget for (d, K, gamma)");
  bounds->add_option("--d", bounds_d, "ambient dimension")->required();
  bounds->add_option("--K", bounds_K, "rounds")->required();
  bounds->add_option("--gamma", bounds_gamma, "discount")->required();
  bounds->add_option("--n", bounds_n, "total query budget, enables the threshold round");
  bounds->callback([&] {
    std::optional<double> n_total;
    if (!std::isnan(bounds_n)) n_total = bounds_n;
    std::cout << budget_to_json(budget_report(bounds_d, bounds_K, bounds_gamma, n_total)).dump(2)
              << "\n";
  });

  // protocol run
  std::string proto_config;
  CLI::App* protocol_cmd = app.add_subcommand("protocol", "raw protocol sessions");
  protocol_cmd->require_subcommand(1);
  CLI::App* proto_run = protocol_cmd->add_subcommand("run", "run a session, print the transcript");
  proto_run->add_option("--config", proto_config, "JSON config")->required();
  proto_run->callback([&] {
    const nlohmann::json j = parse_json_file(proto_config);
    ExperimentConfig c = config_from_json(j);
    // The minimal key set carries no learner; default to the only kind that
    // can honor an induced-query session.
    if (!j.contains("learner_kind") && c.query_mode == QueryMode::kPolicyInduced)
      c.learner_kind = "policy_probe";
    c.validate();
    auto learner = make_learner(c.learner_kind, c.problem, c.d, c.gamma, c.n_per_round,
                                mix_seed(c.seed, 1), c.query_mode == QueryMode::kPolicyInduced);
    std::unique_ptr<Environment> env;
    if (c.adversary_mode == SessionMode::kFixedInstance) {
      const int sign = c.seed % 2 == 0 ? +1 : -1;
      const int depth = std::max(1, std::min(c.K, c.d - 1));
      env = std::make_unique<FixedInstanceEnvironment>(random_hard_instance(
          c.problem, c.d, c.gamma, sign, depth, mix_seed(c.seed, 2)));
    } else {
      const AdversaryMode mode = c.adversary_mode == SessionMode::kFullyAdaptive
                                     ? AdversaryMode::kFullyAdaptive
                                     : AdversaryMode::kMultiBatch;
      env = std::make_unique<AdversaryEnvironment>(
          make_adversary(c.problem, c.d, c.gamma, c.K, mode, false, mix_seed(c.seed, 2)));
    }
    ProtocolResult result = run_protocol(*env, *learner, c.K, c.problem);
    std::cout << transcript_to_jsonl(result.transcript);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const InvariantBreach& e) {
    std::cerr << "invariant breach: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}

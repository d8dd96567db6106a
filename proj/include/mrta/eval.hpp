#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mrta/bidding.hpp"
#include "mrta/consensus.hpp"
#include "mrta/oracle.hpp"

namespace mrta {

struct EvalRecord {
  std::string world_id;
  std::string bidder;
  int n_agents = 0;
  int n_tasks = 0;
  double d_star = 0.0;
  double d_hat = 0.0;
  std::optional<double> eta;  // absent without a complete assignment
  int iterations = 0;
  bool timed_out = false;
  bool oracle_exact = false;
  int uncovered = 0;
};

// eta = 100 * d_star / d_hat
double percent_optimality(double d_star, double d_hat);

struct ValidationPreset {
  std::string name;
  int n_agents = 0;
  IntRange tasks;
  RealRange sides{25.0, 55.0};
};

// val5 / val10 / val15 / val20, 2-4 tasks per agent
const std::vector<ValidationPreset>& validation_presets();
const ValidationPreset& validation_preset(const std::string& name);

std::vector<WorldInstance> make_validation_set(std::uint64_t seed,
                                               const ValidationPreset& preset,
                                               int count = 1000);
// writes <name>.jsonl per preset into dir
void make_validation_sets(std::uint64_t seed, const std::filesystem::path& dir,
                          int count = 1000);

// One record per (world, bidder prototype). Oracle results come from the
// cache, solving misses within the budget; the cache grows in place.
std::vector<EvalRecord> run_validation(const std::vector<WorldInstance>& worlds,
                                       const std::vector<const Bidder*>& bidders,
                                       const RunConfig& config,
                                       const SolverBudget& oracle_budget,
                                       OracleCache& cache, int jobs = 1);

EvalRecord evaluate_run(const WorldInstance& world, const std::string& bidder,
                        const RunResult& run, const OptimalAssignment& oracle);

struct GroupStats {
  std::string bidder;
  int n_agents = 0;
  int count = 0;
  int timeout_count = 0;
  int eta_count = 0;
  double eta_median = 0.0;
  double eta_q1 = 0.0;
  double eta_q3 = 0.0;
  double iter_p95 = 0.0;
  int iter_max = 0;
};

struct SummaryStats {
  std::vector<GroupStats> groups;
};

// Medians and quartiles over non-timeout records; timeouts counted separately.
SummaryStats summarize(const std::vector<EvalRecord>& records);

// type-7 linear interpolation between closest ranks
double quantile(std::vector<double> values, double q);

void export_records_csv(const std::filesystem::path& path,
                        const std::vector<EvalRecord>& records);
std::vector<EvalRecord> load_records_csv(const std::filesystem::path& path);

// records.csv, summary.csv, and box-plot JSON per metric into dir
void export_report(const SummaryStats& stats,
                   const std::vector<EvalRecord>& records,
                   const std::filesystem::path& dir);

}  // namespace mrta

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cardioid/authentication.hpp"
#include "cardioid/features.hpp"
#include "cardioid/identification.hpp"
#include "cardioid/segmentation.hpp"

namespace cardioid {

struct ConfusionCounts {
  long long tp = 0, fp = 0, tn = 0, fn = 0;
};

struct Rates {
  double tpr = 0.0, tnr = 0.0, bac = 0.0;
};

/// tpr = tp/(tp+fn), tnr = tn/(tn+fp), bac = their mean.
Rates bac(const ConfusionCounts& c);

/// One-vs-rest macro averaging over the classes present in `truth`;
/// classes without positive (or negative) trials drop out of that mean.
Rates macro_rates(const std::vector<std::string>& truth, const std::vector<std::string>& pred);

struct AcquisitionStats {
  long long total = 0;     // S: observed periods
  long long accepted = 0;  // S': periods with an accepted morphology
  double elapsed_s = 0.0;
  double rate = 0.0;   // S'/S
  double speed = 0.0;  // S'/elapsed
};

AcquisitionStats acquisition(long long periods_all, long long periods_accepted,
                             double elapsed_s);

enum class PipelineKind { Fixed, Harmonic };

/// One subject's pipeline output: chronological periods, their cross-track
/// errors, and the feature vector of every period that produced one.
struct SubjectData {
  std::string subject_id;
  double elapsed_s = 0.0;
  std::vector<CardiacPeriod> periods;
  std::vector<double> cte;
  std::vector<std::optional<FeatureVector>> features;
};

struct Dataset {
  PipelineKind kind = PipelineKind::Harmonic;
  std::vector<SubjectData> subjects;
};

/// Runs the filtering/segmentation/extraction pipeline per signal. Subjects
/// whose signal yields fewer than two periods are dropped.
Dataset build_dataset(const std::vector<PpgSignal>& signals, PipelineKind kind,
                      const WindowPlan& plan = {}, const FilterOptions& fopts = {},
                      const SegmentationOptions& sopts = {});

struct EmulatedSubset {
  double variance_cap = 0.0;  // infinity for the uncapped subset
  std::map<std::string, std::vector<std::size_t>> included;  // period indices
  std::vector<std::string> excluded_subjects;
};

/// Per cap: keep periods with CTE <= cap, then exclude subjects left with
/// fewer than min_periods of them.
std::vector<EmulatedSubset> emulate_subsets(const Dataset& ds,
                                            const std::vector<double>& caps = {},
                                            int min_periods = 20);

enum class IdentVariant { SoaIdent, Ms, Mc, CardioidLda, CardioidNn };
enum class AuthVariant { SoaAuth, MsAuth, McAuth, Mahal, CardioidAuth };

std::string to_string(IdentVariant v);
std::string to_string(AuthVariant v);

struct BenchmarkOptions {
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  int knn_k = 3;
  NnOptions nn;               // schedule for the NN variant
  double tau_percentile = 95.0;
  int min_subset_periods = 20;
};

struct ReportRow {
  std::string subset;  // cap as text: "2", "4", "6", "inf"
  std::string variant;
  double subjects_included_pct = 0.0;
  double acq_rate = 0.0;
  double acq_speed = 0.0;
  double tpr = 0.0;
  double tnr = 0.0;
  double bac = 0.0;
};

/// Chronological 80/20 split per subject, single-period testing, macro
/// one-vs-rest confusion reduction.
ReportRow run_ident_benchmark(const Dataset& ds, IdentVariant variant,
                              const EmulatedSubset& subset, const BenchmarkOptions& opts = {});

/// Per-subject enrollment on the first 80%; positives are the subject's own
/// test periods, negatives everyone else's; rates averaged over subjects.
ReportRow run_auth_benchmark(const Dataset& ds, AuthVariant variant,
                             const EmulatedSubset& subset, const BenchmarkOptions& opts = {});

/// Every variant at caps {2, 4, 6, inf}; rows that cannot be computed (empty
/// subset, too little training data) carry NaN metrics.
std::vector<ReportRow> run_full_benchmark(const Dataset& fixed, const Dataset& harmonic,
                                          const BenchmarkOptions& opts = {});

void write_report_csv(const std::vector<ReportRow>& rows, const std::string& path);
void write_report_json(const std::vector<ReportRow>& rows, const std::string& path);

}  // namespace cardioid

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cardioid/evaluation.hpp"
#include "cardioid/rng.hpp"
#include "cardioid/synth.hpp"

using namespace cardioid;
using synth::default_spec;
using synth::generate_synthetic;
namespace fs = std::filesystem;

namespace {

// dataset with hand-set cross-track errors; period entries only carry counts
Dataset fake_dataset(const std::vector<std::pair<std::string, std::vector<double>>>& subjects) {
  Dataset ds;
  for (const auto& [id, cte] : subjects) {
    SubjectData s;
    s.subject_id = id;
    s.periods.resize(cte.size());
    s.cte = cte;
    s.elapsed_s = 60.0;
    ds.subjects.push_back(std::move(s));
  }
  return ds;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// five subjects so that even the single-morphology variants see two or more
// enrollable identities; built once and shared across the cases below
const Dataset& cohort(PipelineKind kind) {
  static const auto signals = generate_synthetic(default_spec(5, 120.0, 5));
  static const Dataset fixed = build_dataset(signals, PipelineKind::Fixed);
  static const Dataset harmonic = build_dataset(signals, PipelineKind::Harmonic);
  return kind == PipelineKind::Fixed ? fixed : harmonic;
}

}  // namespace

TEST_CASE("balanced accuracy from a confusion table") {
  const Rates r = bac({.tp = 9, .fp = 2, .tn = 8, .fn = 1});
  CHECK(r.tpr == doctest::Approx(0.9));
  CHECK(r.tnr == doctest::Approx(0.8));
  CHECK(r.bac == doctest::Approx(0.85));

  CHECK_THROWS_AS(bac({.tp = -1, .fp = 0, .tn = 1, .fn = 1}), Error);
  CHECK_THROWS_AS(bac({.tp = 0, .fp = 1, .tn = 1, .fn = 0}), Error);  // no positives
  CHECK_THROWS_AS(bac({.tp = 1, .fp = 0, .tn = 0, .fn = 1}), Error);  // no negatives
}

TEST_CASE("macro rates match a hand-worked three-class table") {
  const std::vector<std::string> truth = {"a", "a", "a", "b", "b", "c"};
  const std::vector<std::string> pred = {"a", "b", "a", "b", "b", "a"};
  // per class: a hits 2/3 with 2/3 specificity; b hits 2/2 with 3/4; c hits
  // 0/1 with 5/5
  const Rates r = macro_rates(truth, pred);
  CHECK(r.tpr == doctest::Approx((2.0 / 3.0 + 1.0 + 0.0) / 3.0));
  CHECK(r.tnr == doctest::Approx((2.0 / 3.0 + 0.75 + 1.0) / 3.0));
  CHECK(r.bac == doctest::Approx(0.5 * (5.0 / 9.0 + 29.0 / 36.0)));

  // a lone class has no negative trials: its specificity is undefined
  const Rates solo = macro_rates({"a", "a"}, {"a", "a"});
  CHECK(solo.tpr == doctest::Approx(1.0));
  CHECK(std::isnan(solo.tnr));

  CHECK_THROWS_AS(macro_rates({"a"}, {}), Error);
}

TEST_CASE("a label-blind predictor scores 0.5 balanced accuracy") {
  // macro averaging makes chance level exactly one half, whatever the class
  // skew and whatever the (label-independent) prediction distribution
  std::mt19937_64 g(41);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> truth, pred;
    const int n = 4000;
    for (int i = 0; i < n; ++i) {
      truth.push_back(std::string(1, static_cast<char>('a' + i % 5)));
      pred.push_back(std::string(1, static_cast<char>('a' + static_cast<int>(5.0 * rng::uniform01(g)) % 5)));
    }
    const Rates r = macro_rates(truth, pred);
    CHECK(r.bac > 0.46);
    CHECK(r.bac < 0.54);
  }
}

TEST_CASE("acquisition statistics and their guards") {
  const AcquisitionStats s = acquisition(10, 8, 4.0);
  CHECK(s.rate == doctest::Approx(0.8));
  CHECK(s.speed == doctest::Approx(2.0));

  const AcquisitionStats empty = acquisition(0, 0, 0.0);
  CHECK(empty.rate == 0.0);
  CHECK(empty.speed == 0.0);

  CHECK_THROWS_AS(acquisition(5, 8, 1.0), Error);   // more accepted than seen
  CHECK_THROWS_AS(acquisition(5, 3, 0.0), Error);   // accepted without elapsed time
  CHECK_THROWS_AS(acquisition(-1, 0, 1.0), Error);
}

TEST_CASE("subset emulation keeps exactly the periods under each cap") {
  const Dataset ds = fake_dataset({
      {"low", {0.5, 1.0, 1.5, 0.2, 1.9}},
      {"mid", {3.0, 3.5, 0.5, 5.0, 2.5}},
      {"high", {7.0, 8.0, 9.0, 6.5, 7.5}},
  });
  const auto subsets = emulate_subsets(ds, {2.0, 4.0, 6.0,
                                            std::numeric_limits<double>::infinity()},
                                       3);
  REQUIRE(subsets.size() == 4);

  CHECK(subsets[0].included.count("low") == 1);
  CHECK(subsets[0].included.at("low") == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(subsets[0].included.count("mid") == 0);  // one period under 2.0
  CHECK(subsets[1].included.count("mid") == 1);
  CHECK(subsets[1].included.at("mid") == std::vector<std::size_t>{0, 1, 2, 4});
  CHECK(subsets[2].included.count("high") == 0);
  CHECK(subsets[3].included.count("high") == 1);

  CHECK(std::count(subsets[0].excluded_subjects.begin(), subsets[0].excluded_subjects.end(),
                   "mid") == 1);
  CHECK(subsets[3].excluded_subjects.empty());
}

TEST_CASE("subset emulation is monotone in the cap") {
  std::mt19937_64 g(43);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<std::pair<std::string, std::vector<double>>> raw;
    const int n_subj = 3 + static_cast<int>(6.0 * rng::uniform01(g));
    for (int s = 0; s < n_subj; ++s) {
      std::vector<double> cte;
      const int n = 5 + static_cast<int>(40.0 * rng::uniform01(g));
      for (int i = 0; i < n; ++i) cte.push_back(8.0 * rng::uniform01(g));
      raw.emplace_back("s" + std::to_string(s), std::move(cte));
    }
    const Dataset ds = fake_dataset(raw);
    const int min_periods = 1 + static_cast<int>(10.0 * rng::uniform01(g));
    const auto subsets = emulate_subsets(ds, {}, min_periods);
    REQUIRE(subsets.size() == 4);

    for (std::size_t k = 0; k < subsets.size(); ++k) {
      // included and excluded partition the subject list
      CHECK(subsets[k].included.size() + subsets[k].excluded_subjects.size() ==
            ds.subjects.size());
      for (const auto& [id, idxs] : subsets[k].included) {
        CHECK(static_cast<int>(idxs.size()) >= min_periods);
        // kept indices are exactly those under the cap, in order
        const auto& cte = ds.subjects[static_cast<std::size_t>(
                                          std::stoi(id.substr(1)))].cte;
        std::vector<std::size_t> expect;
        for (std::size_t i = 0; i < cte.size(); ++i)
          if (cte[i] <= subsets[k].variance_cap) expect.push_back(i);
        CHECK(idxs == expect);
      }
      if (k == 0) continue;
      // a looser cap never loses a subject or a period
      for (const auto& [id, idxs] : subsets[k - 1].included) {
        REQUIRE(subsets[k].included.count(id) == 1);
        const auto& wider = subsets[k].included.at(id);
        CHECK(std::includes(wider.begin(), wider.end(), idxs.begin(), idxs.end()));
      }
    }
  }
}

TEST_CASE("the pipeline dataset is chronological and internally consistent") {
  const auto signals = generate_synthetic(default_spec(2, 60.0, 3));
  for (const PipelineKind kind : {PipelineKind::Fixed, PipelineKind::Harmonic}) {
    const Dataset ds = build_dataset(signals, kind);
    CHECK(ds.kind == kind);
    REQUIRE(ds.subjects.size() == 2);
    for (const auto& subj : ds.subjects) {
      CHECK(subj.elapsed_s == doctest::Approx(60.0).epsilon(0.01));
      REQUIRE(subj.periods.size() >= 2);
      CHECK(subj.cte.size() == subj.periods.size());
      CHECK(subj.features.size() == subj.periods.size());
      for (std::size_t i = 1; i < subj.periods.size(); ++i)
        CHECK(subj.periods[i].raw_start_idx >= subj.periods[i - 1].raw_end_idx);
      for (const double c : subj.cte) {
        CHECK(std::isfinite(c));
        CHECK(c >= 0.0);
      }
      for (std::size_t i = 0; i < subj.features.size(); ++i)
        if (subj.features[i].has_value()) {
          CHECK(subj.features[i]->subject_id == subj.subject_id);
          CHECK(subj.features[i]->values.size() ==
                feature_dims(subj.features[i]->morphology));
        }
    }
  }

  // an unusable signal is dropped, not fatal
  std::vector<PpgSignal> with_junk = signals;
  PpgSignal junk;
  junk.subject_id = "broken";
  junk.sample_rate_hz = 100.0;
  junk.samples = Eigen::VectorXd::Constant(6000, 1.0);
  junk.samples[3000] = std::nan("");
  with_junk.push_back(junk);
  const Dataset ds = build_dataset(with_junk, PipelineKind::Harmonic);
  CHECK(ds.subjects.size() == 2);
}

TEST_CASE("identification benchmark on an easy synthetic cohort") {
  const Dataset& harmonic = cohort(PipelineKind::Harmonic);
  const auto subsets = emulate_subsets(harmonic);
  const EmulatedSubset& open = subsets.back();  // uncapped

  BenchmarkOptions opts;
  const ReportRow mc = run_ident_benchmark(harmonic, IdentVariant::Mc, open, opts);
  CHECK(mc.variant == "MC");
  CHECK(mc.subset == "inf");
  CHECK(mc.subjects_included_pct == doctest::Approx(100.0));
  CHECK(mc.acq_rate > 0.5);
  CHECK(mc.acq_rate <= 1.0);
  CHECK(mc.acq_speed > 0.0);
  CHECK(mc.bac > 0.9);

  // the single-morphology variant admits fewer periods than the
  // multi-morphology one on the same subset
  const ReportRow ms = run_ident_benchmark(harmonic, IdentVariant::Ms, open, opts);
  CHECK(ms.variant == "MS");
  CHECK(ms.acq_rate < mc.acq_rate);

  // guards: wrong pipeline for the variant, empty subset
  CHECK_THROWS_AS(run_ident_benchmark(harmonic, IdentVariant::SoaIdent, open, opts), Error);
  CHECK_THROWS_AS(run_ident_benchmark(harmonic, IdentVariant::Mc, EmulatedSubset{}, opts),
                  Error);
}

TEST_CASE("the neural variant is seed-deterministic") {
  const Dataset& harmonic = cohort(PipelineKind::Harmonic);
  const auto subsets = emulate_subsets(harmonic);
  const EmulatedSubset& open = subsets.back();

  BenchmarkOptions opts;
  opts.seed = 11;
  opts.nn.epochs = 30;
  opts.nn.pretrain_epochs = 10;
  const ReportRow a = run_ident_benchmark(harmonic, IdentVariant::CardioidNn, open, opts);
  const ReportRow b = run_ident_benchmark(harmonic, IdentVariant::CardioidNn, open, opts);
  CHECK(a.bac == b.bac);  // bitwise: same seed, same schedule
  CHECK(a.tpr == b.tpr);
  CHECK(a.tnr == b.tnr);
}

TEST_CASE("authentication benchmark accepts owners and rejects the rest") {
  const Dataset& harmonic = cohort(PipelineKind::Harmonic);
  const auto subsets = emulate_subsets(harmonic);
  const EmulatedSubset& open = subsets.back();

  BenchmarkOptions opts;
  const ReportRow row = run_auth_benchmark(harmonic, AuthVariant::Mahal, open, opts);
  CHECK(row.variant == "Mahal");
  CHECK(row.tpr > 0.5);
  CHECK(row.tpr <= 1.0);
  CHECK(row.tnr > 0.5);
  CHECK(row.tnr <= 1.0);

  CHECK_THROWS_AS(run_auth_benchmark(harmonic, AuthVariant::SoaAuth, open, opts), Error);

  EmulatedSubset one;
  one.variance_cap = 1.0;
  one.included.emplace("s01", std::vector<std::size_t>{0, 1, 2});
  CHECK_THROWS_AS(run_auth_benchmark(harmonic, AuthVariant::Mahal, one, opts), Error);
}

TEST_CASE("the full benchmark emits one row per subset and variant") {
  const Dataset& fixed = cohort(PipelineKind::Fixed);
  const Dataset& harmonic = cohort(PipelineKind::Harmonic);

  BenchmarkOptions opts;
  opts.nn.epochs = 20;
  opts.nn.pretrain_epochs = 5;
  const auto rows = run_full_benchmark(fixed, harmonic, opts);
  REQUIRE(rows.size() == 40);  // 4 caps x (5 identification + 5 authentication)

  const std::vector<std::string> caps = {"2", "4", "6", "inf"};
  const std::vector<std::string> variants = {"SoA-ident", "MS",      "MC",
                                             "CardioID-LDA", "CardioID-NN", "SoA-auth",
                                             "MS-auth",   "MC-auth", "Mahal",
                                             "CardioID-auth"};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].subset == caps[i / 10]);
    CHECK(rows[i].variant == variants[i % 10]);
  }
  // every adaptive-pipeline variant computes on the uncapped subset; the
  // broadband SoA rows may stay NaN because that pipeline recovers far fewer
  // usable periods from the same recordings
  for (const std::size_t i : {31u, 32u, 33u, 34u, 36u, 37u, 38u, 39u})
    CHECK_FALSE(std::isnan(rows[i].bac));
}

TEST_CASE("report files are stable and carry the full table") {
  std::vector<ReportRow> rows(2);
  rows[0] = {"inf", "MC", 100.0, 0.75, 1.25, 0.9, 0.95, 0.925};
  rows[1].subset = "2";
  rows[1].variant = "Mahal";
  rows[1].tpr = rows[1].tnr = rows[1].bac = std::numeric_limits<double>::quiet_NaN();

  const auto csv_path = (fs::temp_directory_path() / "cardioid_report.csv").string();
  const auto json_path = (fs::temp_directory_path() / "cardioid_report.json").string();
  write_report_csv(rows, csv_path);
  write_report_json(rows, json_path);

  const std::string csv = slurp(csv_path);
  CHECK(csv.rfind("subset,variant,subjects_included_pct,acq_rate,acq_speed,tpr,tnr,bac\n",
                  0) == 0);
  CHECK(csv.find("inf,MC,100,0.75,1.25,") != std::string::npos);
  CHECK(csv.find("nan") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  // same rows, same bytes
  const auto csv2_path = (fs::temp_directory_path() / "cardioid_report2.csv").string();
  write_report_csv(rows, csv2_path);
  CHECK(slurp(csv2_path) == csv);

  // numbers that have no JSON encoding become null, not garbage
  const nlohmann::json arr = nlohmann::json::parse(slurp(json_path));
  REQUIRE(arr.is_array());
  REQUIRE(arr.size() == 2);
  CHECK(arr[0]["variant"] == "MC");
  CHECK(arr[0]["bac"].get<double>() == doctest::Approx(0.925));
  CHECK(arr[1]["bac"].is_null());

  fs::remove(csv_path);
  fs::remove(csv2_path);
  fs::remove(json_path);
}

#include "cardioid/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "cardioid/filters.hpp"

namespace cardioid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::set<MorphologyClass> variant_morphologies(IdentVariant v) {
  switch (v) {
    case IdentVariant::SoaIdent:
    case IdentVariant::Ms:
      return {MorphologyClass::M2};
    default:
      return {MorphologyClass::M1, MorphologyClass::M2, MorphologyClass::M3};
  }
}

std::set<MorphologyClass> variant_morphologies(AuthVariant v) {
  switch (v) {
    case AuthVariant::SoaAuth:
    case AuthVariant::MsAuth:
      return {MorphologyClass::M2};
    default:
      return {MorphologyClass::M1, MorphologyClass::M2, MorphologyClass::M3};
  }
}

PipelineKind variant_pipeline(IdentVariant v) {
  return v == IdentVariant::SoaIdent ? PipelineKind::Fixed : PipelineKind::Harmonic;
}

PipelineKind variant_pipeline(AuthVariant v) {
  return v == AuthVariant::SoaAuth ? PipelineKind::Fixed : PipelineKind::Harmonic;
}

std::string cap_name(double cap) {
  if (std::isinf(cap)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", cap);
  return buf;
}

const SubjectData* find_subject(const Dataset& ds, const std::string& id) {
  for (const auto& s : ds.subjects)
    if (s.subject_id == id) return &s;
  return nullptr;
}

struct SplitFeatures {
  std::vector<FeatureVector> train;
  std::vector<FeatureVector> test;
  long long subset_periods = 0;   // S over included subjects
  long long accepted_periods = 0; // S' under the variant's morphology set
  double elapsed_s = 0.0;
};

SplitFeatures split_subset(const Dataset& ds, const EmulatedSubset& subset,
                           const std::set<MorphologyClass>& morphs, double train_fraction) {
  SplitFeatures out;
  for (const auto& [id, idxs] : subset.included) {
    const SubjectData* subj = find_subject(ds, id);
    if (subj == nullptr) continue;
    out.elapsed_s += subj->elapsed_s;
    out.subset_periods += static_cast<long long>(idxs.size());

    const auto split = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(idxs.size())));
    for (std::size_t i = 0; i < idxs.size(); ++i) {
      const auto& fv = subj->features[idxs[i]];
      const bool usable = fv.has_value() && morphs.count(fv->morphology) > 0;
      if (usable) ++out.accepted_periods;
      if (!usable) continue;
      if (i < split) out.train.push_back(*fv);
      else out.test.push_back(*fv);
    }
  }
  return out;
}

double pct_included(const EmulatedSubset& subset) {
  const auto inc = subset.included.size();
  const auto all = inc + subset.excluded_subjects.size();
  return all == 0 ? 0.0 : 100.0 * static_cast<double>(inc) / static_cast<double>(all);
}

ReportRow base_row(const std::string& variant, const EmulatedSubset& subset,
                   const SplitFeatures& split) {
  ReportRow row;
  row.subset = cap_name(subset.variance_cap);
  row.variant = variant;
  row.subjects_included_pct = pct_included(subset);
  const AcquisitionStats acq =
      acquisition(split.subset_periods, split.accepted_periods, split.elapsed_s);
  row.acq_rate = acq.rate;
  row.acq_speed = acq.speed;
  return row;
}

// trim morphology groups that cannot satisfy the trainer's minimum
std::vector<FeatureVector> trim_groups(const std::vector<FeatureVector>& fvs,
                                       IdentVariant variant, int knn_k) {
  std::map<MorphologyClass, long long> count;
  for (const auto& fv : fvs) ++count[fv.morphology];
  std::vector<FeatureVector> out;
  for (const auto& fv : fvs) {
    const long long n = count[fv.morphology];
    bool ok = true;
    if (variant == IdentVariant::CardioidLda) ok = n > feature_dims(fv.morphology);
    else if (variant != IdentVariant::CardioidNn) ok = n >= knn_k;
    if (ok) out.push_back(fv);
  }
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(IdentVariant v) {
  switch (v) {
    case IdentVariant::SoaIdent: return "SoA-ident";
    case IdentVariant::Ms: return "MS";
    case IdentVariant::Mc: return "MC";
    case IdentVariant::CardioidLda: return "CardioID-LDA";
    case IdentVariant::CardioidNn: return "CardioID-NN";
  }
  return "";
}

std::string to_string(AuthVariant v) {
  switch (v) {
    case AuthVariant::SoaAuth: return "SoA-auth";
    case AuthVariant::MsAuth: return "MS-auth";
    case AuthVariant::McAuth: return "MC-auth";
    case AuthVariant::Mahal: return "Mahal";
    case AuthVariant::CardioidAuth: return "CardioID-auth";
  }
  return "";
}

Rates bac(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0)
    throw Error(Err::InvalidCounts, "negative confusion counts");
  if (c.tp + c.fn == 0 || c.tn + c.fp == 0)
    throw Error(Err::UndefinedRate, "empty positive or negative class");
  Rates r;
  r.tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  r.tnr = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  r.bac = 0.5 * (r.tpr + r.tnr);
  return r;
}

Rates macro_rates(const std::vector<std::string>& truth, const std::vector<std::string>& pred) {
  if (truth.size() != pred.size())
    throw Error(Err::DimensionMismatch, "truth/prediction length mismatch");
  std::set<std::string> classes(truth.begin(), truth.end());
  double tpr_sum = 0.0, tnr_sum = 0.0;
  int tpr_n = 0, tnr_n = 0;
  for (const auto& c : classes) {
    ConfusionCounts cc;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool is_pos = truth[i] == c;
      const bool said_pos = pred[i] == c;
      if (is_pos && said_pos) ++cc.tp;
      else if (is_pos) ++cc.fn;
      else if (said_pos) ++cc.fp;
      else ++cc.tn;
    }
    if (cc.tp + cc.fn > 0) {
      tpr_sum += static_cast<double>(cc.tp) / static_cast<double>(cc.tp + cc.fn);
      ++tpr_n;
    }
    if (cc.tn + cc.fp > 0) {
      tnr_sum += static_cast<double>(cc.tn) / static_cast<double>(cc.tn + cc.fp);
      ++tnr_n;
    }
  }
  Rates r;
  r.tpr = tpr_n > 0 ? tpr_sum / tpr_n : std::numeric_limits<double>::quiet_NaN();
  r.tnr = tnr_n > 0 ? tnr_sum / tnr_n : std::numeric_limits<double>::quiet_NaN();
  r.bac = 0.5 * (r.tpr + r.tnr);
  return r;
}

AcquisitionStats acquisition(long long periods_all, long long periods_accepted,
                             double elapsed_s) {
  if (periods_all < 0 || periods_accepted < 0 || periods_accepted > periods_all ||
      elapsed_s < 0.0 || (periods_accepted > 0 && elapsed_s == 0.0))
    throw Error(Err::InvalidCounts, "inconsistent acquisition counts");
  AcquisitionStats s;
  s.total = periods_all;
  s.accepted = periods_accepted;
  s.elapsed_s = elapsed_s;
  s.rate = periods_all == 0
               ? 0.0
               : static_cast<double>(periods_accepted) / static_cast<double>(periods_all);
  s.speed = periods_accepted == 0 ? 0.0 : static_cast<double>(periods_accepted) / elapsed_s;
  return s;
}

Dataset build_dataset(const std::vector<PpgSignal>& signals, PipelineKind kind,
                      const WindowPlan& plan, const FilterOptions& fopts,
                      const SegmentationOptions& sopts) {
  Dataset ds;
  ds.kind = kind;
  for (const auto& sig : signals) {
    SubjectData subj;
    subj.subject_id = sig.subject_id;
    subj.elapsed_s = sig.duration_s();
    try {
      const auto estimates = estimate_f1h(sig, plan);
      PpgSignal filtered = kind == PipelineKind::Fixed
                               ? soa_filter(sig)
                               : harmonic_filter(sig, estimates, plan, fopts);
      const PpgSignal deriv = second_derivative(filtered);
      subj.periods = segment_periods(filtered, deriv, estimates, plan, sopts);
      if (subj.periods.size() < 2) continue;
      subj.cte = cte_variance(subj.periods, PeriodChannel::H).per_period_cte;
    } catch (const Error&) {
      continue;  // unusable recording; benchmark proceeds with the rest
    }
    for (const auto& p : subj.periods) {
      try {
        subj.features.push_back(extract_features(p, sopts.prominence_frac));
      } catch (const Error&) {
        subj.features.push_back(std::nullopt);
      }
    }
    ds.subjects.push_back(std::move(subj));
  }
  return ds;
}

std::vector<EmulatedSubset> emulate_subsets(const Dataset& ds, const std::vector<double>& caps,
                                            int min_periods) {
  std::vector<double> use = caps;
  if (use.empty()) use = {2.0, 4.0, 6.0, kInf};

  std::vector<EmulatedSubset> out;
  for (const double cap : use) {
    EmulatedSubset sub;
    sub.variance_cap = cap;
    for (const auto& subj : ds.subjects) {
      std::vector<std::size_t> keep;
      for (std::size_t i = 0; i < subj.periods.size(); ++i)
        if (subj.cte[i] <= cap) keep.push_back(i);
      if (static_cast<int>(keep.size()) >= min_periods)
        sub.included.emplace(subj.subject_id, std::move(keep));
      else
        sub.excluded_subjects.push_back(subj.subject_id);
    }
    out.push_back(std::move(sub));
  }
  return out;
}

ReportRow run_ident_benchmark(const Dataset& ds, IdentVariant variant,
                              const EmulatedSubset& subset, const BenchmarkOptions& opts) {
  if (ds.kind != variant_pipeline(variant))
    throw Error(Err::InvalidSpec, "dataset pipeline does not match the variant");
  if (subset.included.empty()) throw Error(Err::EmptySubset, "no subjects in subset");

  const auto morphs = variant_morphologies(variant);
  const SplitFeatures split = split_subset(ds, subset, morphs, opts.train_fraction);
  ReportRow row = base_row(to_string(variant), subset, split);

  const std::vector<FeatureVector> train = trim_groups(split.train, variant, opts.knn_k);

  IdentModel model;
  switch (variant) {
    case IdentVariant::CardioidLda:
      model = train_lda(train);
      break;
    case IdentVariant::CardioidNn: {
      NnOptions nn = opts.nn;
      nn.seed = opts.seed;
      model = train_nn(train, nn);
      break;
    }
    default:
      model = train_knn(train, opts.knn_k);
      break;
  }

  std::vector<std::string> truth, pred;
  for (const auto& fv : split.test) {
    truth.push_back(fv.subject_id);
    try {
      pred.push_back(identify(model, fv).label);
    } catch (const Error&) {
      pred.push_back("");  // unidentifiable period counts against its class
    }
  }
  if (truth.empty()) throw Error(Err::EmptySubset, "no test periods in subset");

  const Rates r = macro_rates(truth, pred);
  row.tpr = r.tpr;
  row.tnr = r.tnr;
  row.bac = r.bac;
  return row;
}

ReportRow run_auth_benchmark(const Dataset& ds, AuthVariant variant,
                             const EmulatedSubset& subset, const BenchmarkOptions& opts) {
  if (ds.kind != variant_pipeline(variant))
    throw Error(Err::InvalidSpec, "dataset pipeline does not match the variant");
  if (subset.included.size() < 2)
    throw Error(Err::TooFewSubjects, "authentication needs at least 2 subjects");

  const auto morphs = variant_morphologies(variant);
  const SplitFeatures split = split_subset(ds, subset, morphs, opts.train_fraction);
  ReportRow row = base_row(to_string(variant), subset, split);

  EnrollOptions eopts;
  eopts.mahalanobis =
      variant == AuthVariant::Mahal || variant == AuthVariant::CardioidAuth;
  eopts.multi_cluster = variant == AuthVariant::CardioidAuth;
  eopts.tau_percentile = opts.tau_percentile;
  eopts.min_enroll_periods = static_cast<int>(
      std::floor(opts.train_fraction * static_cast<double>(opts.min_subset_periods)));

  // per-subject train/test features, keyed by subject for impostor pooling
  std::map<std::string, std::vector<FeatureVector>> train_by, test_by;
  for (const auto& [id, idxs] : subset.included) {
    const SubjectData* subj = find_subject(ds, id);
    if (subj == nullptr) continue;
    const auto at = static_cast<std::size_t>(
        std::floor(opts.train_fraction * static_cast<double>(idxs.size())));
    for (std::size_t i = 0; i < idxs.size(); ++i) {
      const auto& fv = subj->features[idxs[i]];
      if (!fv.has_value() || morphs.count(fv->morphology) == 0) continue;
      (i < at ? train_by : test_by)[id].push_back(*fv);
    }
  }

  double tpr_sum = 0.0, tnr_sum = 0.0;
  int tpr_n = 0, tnr_n = 0;
  for (const auto& [id, train] : train_by) {
    AuthProfile profile;
    try {
      profile = enroll(train, id, eopts);
    } catch (const Error&) {
      continue;  // subject cannot enroll under this variant
    }

    long long tp = 0, fn = 0, tn = 0, fp = 0;
    for (const auto& [tid, fvs] : test_by) {
      for (const auto& fv : fvs) {
        const bool accepted = verify(profile, fv).accept;
        if (tid == id) accepted ? ++tp : ++fn;
        else accepted ? ++fp : ++tn;
      }
    }
    if (tp + fn > 0) {
      tpr_sum += static_cast<double>(tp) / static_cast<double>(tp + fn);
      ++tpr_n;
    }
    if (tn + fp > 0) {
      tnr_sum += static_cast<double>(tn) / static_cast<double>(tn + fp);
      ++tnr_n;
    }
  }

  row.tpr = tpr_n > 0 ? tpr_sum / tpr_n : std::numeric_limits<double>::quiet_NaN();
  row.tnr = tnr_n > 0 ? tnr_sum / tnr_n : std::numeric_limits<double>::quiet_NaN();
  row.bac = 0.5 * (row.tpr + row.tnr);
  return row;
}

std::vector<ReportRow> run_full_benchmark(const Dataset& fixed, const Dataset& harmonic,
                                          const BenchmarkOptions& opts) {
  const auto fixed_subsets = emulate_subsets(fixed, {}, opts.min_subset_periods);
  const auto harmonic_subsets = emulate_subsets(harmonic, {}, opts.min_subset_periods);

  const std::vector<IdentVariant> ident = {IdentVariant::SoaIdent, IdentVariant::Ms,
                                           IdentVariant::Mc, IdentVariant::CardioidLda,
                                           IdentVariant::CardioidNn};
  const std::vector<AuthVariant> auth = {AuthVariant::SoaAuth, AuthVariant::MsAuth,
                                         AuthVariant::McAuth, AuthVariant::Mahal,
                                         AuthVariant::CardioidAuth};

  std::vector<ReportRow> rows;
  for (std::size_t si = 0; si < fixed_subsets.size(); ++si) {
    for (const auto v : ident) {
      const bool is_fixed = variant_pipeline(v) == PipelineKind::Fixed;
      const Dataset& ds = is_fixed ? fixed : harmonic;
      const EmulatedSubset& sub = is_fixed ? fixed_subsets[si] : harmonic_subsets[si];
      try {
        rows.push_back(run_ident_benchmark(ds, v, sub, opts));
      } catch (const Error&) {
        ReportRow row;
        row.subset = cap_name(sub.variance_cap);
        row.variant = to_string(v);
        row.subjects_included_pct = pct_included(sub);
        row.tpr = row.tnr = row.bac = std::numeric_limits<double>::quiet_NaN();
        rows.push_back(std::move(row));
      }
    }
    for (const auto v : auth) {
      const bool is_fixed = variant_pipeline(v) == PipelineKind::Fixed;
      const Dataset& ds = is_fixed ? fixed : harmonic;
      const EmulatedSubset& sub = is_fixed ? fixed_subsets[si] : harmonic_subsets[si];
      try {
        rows.push_back(run_auth_benchmark(ds, v, sub, opts));
      } catch (const Error&) {
        ReportRow row;
        row.subset = cap_name(sub.variance_cap);
        row.variant = to_string(v);
        row.subjects_included_pct = pct_included(sub);
        row.tpr = row.tnr = row.bac = std::numeric_limits<double>::quiet_NaN();
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

void write_report_csv(const std::vector<ReportRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Err::MalformedInput, "cannot write " + path);
  out << "subset,variant,subjects_included_pct,acq_rate,acq_speed,tpr,tnr,bac\n";
  for (const auto& r : rows)
    out << r.subset << "," << r.variant << "," << format_double(r.subjects_included_pct)
        << "," << format_double(r.acq_rate) << "," << format_double(r.acq_speed) << ","
        << format_double(r.tpr) << "," << format_double(r.tnr) << ","
        << format_double(r.bac) << "\n";
}

void write_report_json(const std::vector<ReportRow>& rows, const std::string& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"subset", r.subset},
                   {"variant", r.variant},
                   {"subjects_included_pct", r.subjects_included_pct},
                   {"acq_rate", r.acq_rate},
                   {"acq_speed", r.acq_speed},
                   {"tpr", r.tpr},
                   {"tnr", r.tnr},
                   {"bac", r.bac}});
  }
  std::ofstream out(path);
  if (!out) throw Error(Err::MalformedInput, "cannot write " + path);
  out << arr.dump(2) << "\n";
}

}  // namespace cardioid

// cardioid: command-line surface of the PPG biometric pipeline.
//
// One binary, one subcommand per pipeline stage. Every subcommand prints a
// single-line JSON summary to stdout and writes its artifacts under --out.
// Exit codes: 0 success, 1 domain error (details on stderr), 2 usage error.
//
// Settings resolve in order: command-line flag, then --config JSON, then the
// PPG_BIOID_SEED environment variable (seed only), then built-in defaults.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cardioid/authentication.hpp"
#include "cardioid/config.hpp"
#include "cardioid/evaluation.hpp"
#include "cardioid/features.hpp"
#include "cardioid/filters.hpp"
#include "cardioid/identification.hpp"
#include "cardioid/io.hpp"
#include "cardioid/segmentation.hpp"
#include "cardioid/synth.hpp"
#include "cardioid/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cardioid::cli {
namespace {

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string path_stem(const std::string& p) { return fs::path(p).stem().string(); }

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

void ensure_parent_dir(const std::string& file) {
  const fs::path parent = fs::path(file).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void print_summary(const json& j) { std::cout << j.dump() << "\n"; }

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("PPG_BIOID_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v, &end, 10);
  if (errno != 0 || end == v || *end != '\0')
    throw Error(Err::InvalidSpec, "PPG_BIOID_SEED is not an unsigned integer");
  return static_cast<std::uint64_t>(x);
}

// flag > value from a config/spec file > PPG_BIOID_SEED > 0
std::uint64_t resolve_seed(const CLI::Option* flag, std::uint64_t flag_value,
                           std::optional<std::uint64_t> file_value) {
  if (flag != nullptr && flag->count() > 0) return flag_value;
  if (file_value.has_value()) return *file_value;
  if (const auto e = env_seed()) return *e;
  return 0;
}

PipelineConfig load_config(const std::string& path, bool* file_has_seed = nullptr) {
  if (file_has_seed != nullptr) *file_has_seed = false;
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw Error(Err::MalformedInput, "cannot open config " + path);
  const json j = json::parse(in);
  if (file_has_seed != nullptr) *file_has_seed = j.contains("seed");
  return PipelineConfig::from_json(j);
}

// ---------------------------------------------------------------------------
// Cardiac-period CSV: the handoff format between `segment` and `features`.
// Header: subject,duration_s,start_idx,end_idx,h_scale,h2_scale,h0..,g0..
// where h* is the normalized period and g* its second-derivative channel.

void write_periods_csv(const std::vector<CardiacPeriod>& periods, const std::string& path) {
  if (periods.empty()) throw Error(Err::EmptyInput, "no periods to write");
  const Eigen::Index len = periods.front().h_samples.size();
  std::ofstream out(path);
  if (!out) throw Error(Err::MalformedInput, "cannot write " + path);
  out << "subject,duration_s,start_idx,end_idx,h_scale,h2_scale";
  for (Eigen::Index i = 0; i < len; ++i) out << ",h" << i;
  for (Eigen::Index i = 0; i < len; ++i) out << ",g" << i;
  out << "\n";
  out.precision(17);
  for (const auto& p : periods) {
    if (p.h_samples.size() != len || p.h2_samples.size() != len)
      throw Error(Err::DimensionMismatch, "mixed period lengths in one file");
    out << p.subject_id << "," << p.duration_s << "," << p.raw_start_idx << ","
        << p.raw_end_idx << "," << p.h_scale << "," << p.h2_scale;
    for (Eigen::Index i = 0; i < len; ++i) out << "," << p.h_samples[i];
    for (Eigen::Index i = 0; i < len; ++i) out << "," << p.h2_samples[i];
    out << "\n";
  }
}

std::vector<CardiacPeriod> read_periods_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Err::MalformedInput, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("subject,duration_s", 0) != 0)
    throw Error(Err::MalformedInput, "missing period CSV header in " + path);
  long long ncols = 1;
  for (const char c : line)
    if (c == ',') ++ncols;
  const long long len = (ncols - 6) / 2;
  if (len < 2 || 6 + 2 * len != ncols)
    throw Error(Err::MalformedInput, "malformed period CSV header in " + path);

  std::vector<CardiacPeriod> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    const auto next = [&](const char* what) {
      if (!std::getline(ss, cell, ','))
        throw Error(Err::MalformedInput,
                    std::string("missing ") + what + " at " + path + ":" + std::to_string(lineno));
      return cell;
    };
    const auto next_num = [&](const char* what) {
      try {
        return std::stod(next(what));
      } catch (const std::exception&) {
        throw Error(Err::MalformedInput,
                    std::string("bad ") + what + " at " + path + ":" + std::to_string(lineno));
      }
    };
    CardiacPeriod p;
    p.subject_id = next("subject");
    p.duration_s = next_num("duration_s");
    p.raw_start_idx = static_cast<Eigen::Index>(next_num("start_idx"));
    p.raw_end_idx = static_cast<Eigen::Index>(next_num("end_idx"));
    p.h_scale = next_num("h_scale");
    p.h2_scale = next_num("h2_scale");
    p.h_samples.resize(len);
    p.h2_samples.resize(len);
    for (long long i = 0; i < len; ++i) p.h_samples[i] = next_num("h sample");
    for (long long i = 0; i < len; ++i) p.h2_samples[i] = next_num("g sample");
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<FeatureVector> read_feature_files(const std::vector<std::string>& paths) {
  std::vector<FeatureVector> all;
  for (const auto& p : paths) {
    auto part = read_features_csv(p);
    all.insert(all.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  if (all.empty()) throw Error(Err::EmptyInput, "feature files contain no rows");
  return all;
}

std::vector<PpgSignal> load_signal_dir(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".csv" || ext == ".jsonl") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(Err::EmptyInput, "no .csv or .jsonl signals in " + dir);
  std::vector<PpgSignal> signals;
  signals.reserve(files.size());
  for (const auto& f : files) {
    PpgSignal sig = load_signal(f, format_from_path(f));
    if (sig.subject_id.empty()) sig.subject_id = path_stem(f);
    signals.push_back(std::move(sig));
  }
  return signals;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string spec_path, out;
  int subjects = 5;
  double duration_s = 60.0;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void run_synth(const SynthArgs& a) {
  synth::SyntheticSpec spec;
  std::optional<std::uint64_t> file_seed;
  if (!a.spec_path.empty()) {
    std::ifstream in(a.spec_path);
    if (!in) throw Error(Err::MalformedInput, "cannot open spec " + a.spec_path);
    const json j = json::parse(in);
    spec = synth::SyntheticSpec::from_json(j);
    if (j.contains("seed")) file_seed = spec.seed;
  } else {
    spec = synth::default_spec(a.subjects, a.duration_s, 0);
  }
  spec.seed = resolve_seed(a.seed_opt, a.seed, file_seed);
  spec.validate();

  const auto signals = synth::generate_synthetic(spec);
  ensure_dir(a.out);
  json files = json::array();
  for (const auto& sig : signals) {
    const std::string path = join_path(a.out, sig.subject_id + ".csv");
    save_signal_csv(sig, path);
    files.push_back(path);
  }
  {
    std::ofstream out(join_path(a.out, "spec.json"));
    out << spec.to_json().dump(2) << "\n";
  }
  print_summary({{"command", "synth"},
                 {"subjects", spec.n_subjects},
                 {"duration_s", spec.duration_s},
                 {"sample_rate_hz", spec.sample_rate_hz},
                 {"seed", spec.seed},
                 {"files", files}});
}

void setup_synth(CLI::App& app) {
  auto a = std::make_shared<SynthArgs>();
  auto* sub = app.add_subcommand("synth", "Generate synthetic PPG recordings");
  auto* spec = sub->add_option("--spec", a->spec_path, "Generator spec JSON");
  auto* nsub = sub->add_option("--subjects", a->subjects, "Subject count (default spec)");
  auto* dur = sub->add_option("--duration", a->duration_s, "Recording length, seconds");
  a->seed_opt = sub->add_option("--seed", a->seed, "RNG seed");
  sub->add_option("--out", a->out, "Output directory")->required();
  spec->excludes(nsub)->excludes(dur);
  sub->callback([a] { run_synth(*a); });
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  std::string in, out, subject, format = "auto";
};

void run_ingest(const IngestArgs& a) {
  SignalFormat fmt = a.format == "csv"     ? SignalFormat::Csv
                     : a.format == "jsonl" ? SignalFormat::Jsonl
                                           : format_from_path(a.in);
  PpgSignal sig = load_signal(a.in, fmt);
  sig.subject_id = a.subject.empty() ? path_stem(a.in) : a.subject;
  ensure_dir(a.out);
  const std::string path = join_path(a.out, sig.subject_id + ".csv");
  save_signal_csv(sig, path);
  print_summary({{"command", "ingest"},
                 {"subject", sig.subject_id},
                 {"samples", sig.samples.size()},
                 {"sample_rate_hz", sig.sample_rate_hz},
                 {"duration_s", sig.duration_s()},
                 {"file", path}});
}

void setup_ingest(CLI::App& app) {
  auto a = std::make_shared<IngestArgs>();
  auto* sub = app.add_subcommand("ingest", "Normalize a raw recording to CSV");
  sub->add_option("--in", a->in, "Input signal (.csv or .jsonl)")->required();
  sub->add_option("--format", a->format, "Input format")
      ->check(CLI::IsMember({"auto", "csv", "jsonl"}));
  sub->add_option("--subject", a->subject, "Subject id (default: file stem)");
  sub->add_option("--out", a->out, "Output directory")->required();
  sub->callback([a] { run_ingest(*a); });
}

// ---------------------------------------------------------------------------
// shared config/flag plumbing for the processing stages

struct StageArgs {
  std::string config_path;
  double window_s = 0, stride_s = 0;
  double fl_mult = 0, fh_mult = 0;
  int order = 0;
  int period_len = 0;
  double prominence = 0;
  double min_duration = 0, max_duration = 0;
  CLI::Option *window_opt = nullptr, *stride_opt = nullptr, *fl_opt = nullptr, *fh_opt = nullptr,
              *order_opt = nullptr, *len_opt = nullptr, *prom_opt = nullptr, *mind_opt = nullptr,
              *maxd_opt = nullptr;

  void add_filter_flags(CLI::App* sub) {
    sub->add_option("--config", config_path, "Pipeline config JSON");
    window_opt = sub->add_option("--window", window_s, "Estimation window, seconds");
    stride_opt = sub->add_option("--stride", stride_s, "Window stride, seconds");
    fl_opt = sub->add_option("--fl-mult", fl_mult, "Low cutoff as multiple of f1h");
    fh_opt = sub->add_option("--fh-mult", fh_mult, "High cutoff as multiple of f1h");
    order_opt = sub->add_option("--order", order, "Butterworth prototype order");
  }

  void add_segment_flags(CLI::App* sub) {
    len_opt = sub->add_option("--period-len", period_len, "Resampled period length");
    prom_opt = sub->add_option("--prominence", prominence, "Extrema prominence fraction");
    mind_opt = sub->add_option("--min-duration", min_duration, "Shortest period, seconds");
    maxd_opt = sub->add_option("--max-duration", max_duration, "Longest period, seconds");
  }

  PipelineConfig merged() const {
    PipelineConfig cfg = load_config(config_path);
    if (window_opt && window_opt->count()) cfg.plan.window_s = window_s;
    if (stride_opt && stride_opt->count()) cfg.plan.stride_s = stride_s;
    if (fl_opt && fl_opt->count()) cfg.filter.fl_multiplier = fl_mult;
    if (fh_opt && fh_opt->count()) cfg.filter.fh_multiplier = fh_mult;
    if (order_opt && order_opt->count()) cfg.filter.butterworth_order = order;
    if (len_opt && len_opt->count()) cfg.seg.period_len = period_len;
    if (prom_opt && prom_opt->count()) cfg.seg.prominence_frac = prominence;
    if (mind_opt && mind_opt->count()) cfg.seg.min_duration_s = min_duration;
    if (maxd_opt && maxd_opt->count()) cfg.seg.max_duration_s = max_duration;
    return cfg;
  }
};

// ---------------------------------------------------------------------------
// filter

struct FilterArgs {
  StageArgs stage;
  std::string in, out, mode = "harmonic";
};

void run_filter(const FilterArgs& a) {
  const PipelineConfig cfg = a.stage.merged();
  const PpgSignal sig = load_signal(a.in, format_from_path(a.in));
  const std::string stem = path_stem(a.in);
  ensure_dir(a.out);

  json summary{{"command", "filter"}, {"mode", a.mode}, {"samples", sig.samples.size()}};
  if (a.mode == "fixed") {
    const PpgSignal f = soa_filter(sig);
    const std::string path = join_path(a.out, stem + "_f.csv");
    save_signal_csv(f, path);
    summary["file"] = path;
  } else {
    const auto estimates = estimate_f1h(sig, cfg.plan);
    const PpgSignal h = harmonic_filter(sig, estimates, cfg.plan, cfg.filter);
    const std::string path = join_path(a.out, stem + "_h.csv");
    save_signal_csv(h, path);

    json windows = json::array();
    double f1h_sum = 0.0;
    for (const auto& e : estimates) {
      windows.push_back({{"start_s", e.window_start_s}, {"f1h_hz", e.f1h_hz}});
      f1h_sum += e.f1h_hz;
    }
    const std::string wpath = join_path(a.out, stem + "_windows.json");
    std::ofstream wout(wpath);
    wout << windows.dump(2) << "\n";

    summary["file"] = path;
    summary["windows"] = estimates.size();
    summary["f1h_mean_hz"] = f1h_sum / static_cast<double>(estimates.size());
  }
  print_summary(summary);
}

void setup_filter(CLI::App& app) {
  auto a = std::make_shared<FilterArgs>();
  auto* sub = app.add_subcommand("filter", "Band-pass a recording (fixed or per-subject band)");
  sub->add_option("--in", a->in, "Input signal")->required();
  sub->add_option("--mode", a->mode, "Filter band")->check(CLI::IsMember({"harmonic", "fixed"}));
  a->stage.add_filter_flags(sub);
  sub->add_option("--out", a->out, "Output directory")->required();
  sub->callback([a] { run_filter(*a); });
}

// ---------------------------------------------------------------------------
// segment

struct SegmentArgs {
  StageArgs stage;
  std::string in, out, mode = "harmonic";
};

void run_segment(const SegmentArgs& a) {
  const PipelineConfig cfg = a.stage.merged();
  PpgSignal sig = load_signal(a.in, format_from_path(a.in));
  if (sig.subject_id.empty()) sig.subject_id = path_stem(a.in);

  const auto estimates = estimate_f1h(sig, cfg.plan);
  const PpgSignal band = a.mode == "fixed"
                             ? soa_filter(sig)
                             : harmonic_filter(sig, estimates, cfg.plan, cfg.filter);
  const PpgSignal band2 = second_derivative(band);
  const auto periods = segment_periods(band, band2, estimates, cfg.plan, cfg.seg);

  ensure_dir(a.out);
  const std::string path = join_path(a.out, path_stem(a.in) + "_periods.csv");
  write_periods_csv(periods, path);

  double dur_sum = 0.0;
  for (const auto& p : periods) dur_sum += p.duration_s;
  print_summary({{"command", "segment"},
                 {"mode", a.mode},
                 {"periods", periods.size()},
                 {"mean_duration_s", dur_sum / static_cast<double>(periods.size())},
                 {"file", path}});
}

void setup_segment(CLI::App& app) {
  auto a = std::make_shared<SegmentArgs>();
  auto* sub = app.add_subcommand("segment", "Cut a recording into normalized cardiac periods");
  sub->add_option("--in", a->in, "Input signal")->required();
  sub->add_option("--mode", a->mode, "Filter band")->check(CLI::IsMember({"harmonic", "fixed"}));
  a->stage.add_filter_flags(sub);
  a->stage.add_segment_flags(sub);
  sub->add_option("--out", a->out, "Output directory")->required();
  sub->callback([a] { run_segment(*a); });
}

// ---------------------------------------------------------------------------
// features

struct FeaturesArgs {
  StageArgs stage;
  std::string in, out;
};

void run_features(const FeaturesArgs& a) {
  const PipelineConfig cfg = a.stage.merged();
  const auto periods = read_periods_csv(a.in);
  if (periods.empty()) throw Error(Err::EmptyInput, "no periods in " + a.in);

  std::map<MorphologyClass, std::vector<FeatureVector>> by_morph;
  std::map<std::string, int> skipped;
  for (const auto& p : periods) {
    try {
      FeatureVector fv = extract_features(p, cfg.seg.prominence_frac);
      by_morph[fv.morphology].push_back(std::move(fv));
    } catch (const Error& e) {
      ++skipped[to_string(e.kind())];
    }
  }

  ensure_dir(a.out);
  std::string stem = path_stem(a.in);
  if (const auto pos = stem.rfind("_periods");
      pos != std::string::npos && pos + 8 == stem.size())
    stem.erase(pos);
  json files = json::object();
  std::size_t extracted = 0;
  for (const auto& [morph, fvs] : by_morph) {
    const std::string path = join_path(a.out, stem + "_" + to_string(morph) + ".csv");
    write_features_csv(fvs, path);
    files[to_string(morph)] = path;
    extracted += fvs.size();
  }
  print_summary({{"command", "features"},
                 {"periods", periods.size()},
                 {"extracted", extracted},
                 {"skipped", skipped},
                 {"files", files}});
}

void setup_features(CLI::App& app) {
  auto a = std::make_shared<FeaturesArgs>();
  auto* sub = app.add_subcommand("features", "Extract fiducial features from periods");
  sub->add_option("--in", a->in, "Period CSV from `segment`")->required();
  sub->add_option("--config", a->stage.config_path, "Pipeline config JSON");
  a->stage.prom_opt =
      sub->add_option("--prominence", a->stage.prominence, "Extrema prominence fraction");
  sub->add_option("--out", a->out, "Output directory")->required();
  sub->callback([a] { run_features(*a); });
}

// ---------------------------------------------------------------------------
// train-ident

struct TrainIdentArgs {
  std::string config_path, out, method = "knn";
  std::vector<std::string> features;
  int k = 0;
  int epochs = 0, pretrain = 0, batch = 0;
  double lr = 0, l2 = 0, rho = 0, beta = 0;
  std::uint64_t seed = 0;
  CLI::Option *k_opt = nullptr, *epochs_opt = nullptr, *pretrain_opt = nullptr,
              *batch_opt = nullptr, *lr_opt = nullptr, *l2_opt = nullptr, *rho_opt = nullptr,
              *beta_opt = nullptr, *seed_opt = nullptr;
};

void run_train_ident(const TrainIdentArgs& a) {
  bool file_seed = false;
  PipelineConfig cfg = load_config(a.config_path, &file_seed);
  if (a.k_opt->count()) cfg.knn_k = a.k;
  if (a.epochs_opt->count()) cfg.nn.epochs = a.epochs;
  if (a.pretrain_opt->count()) cfg.nn.pretrain_epochs = a.pretrain;
  if (a.batch_opt->count()) cfg.nn.batch = a.batch;
  if (a.lr_opt->count()) cfg.nn.lr = a.lr;
  if (a.l2_opt->count()) cfg.nn.l2 = a.l2;
  if (a.rho_opt->count()) cfg.nn.rho = a.rho;
  if (a.beta_opt->count()) cfg.nn.beta = a.beta;
  cfg.seed = resolve_seed(a.seed_opt, a.seed,
                          file_seed ? std::optional<std::uint64_t>(cfg.seed) : std::nullopt);
  cfg.nn.seed = cfg.seed;

  const auto train = read_feature_files(a.features);
  IdentModel model;
  if (a.method == "knn") model = train_knn(train, cfg.knn_k);
  else if (a.method == "lda") model = train_lda(train);
  else model = train_nn(train, cfg.nn);

  ensure_parent_dir(a.out);
  model.save(a.out);

  json morphs = json::array();
  for (const auto& [m, sub] : model.submodels) morphs.push_back(to_string(m));
  print_summary({{"command", "train-ident"},
                 {"method", a.method},
                 {"subjects", model.labels.size()},
                 {"samples", train.size()},
                 {"morphologies", morphs},
                 {"file", a.out}});
}

void setup_train_ident(CLI::App& app) {
  auto a = std::make_shared<TrainIdentArgs>();
  auto* sub = app.add_subcommand("train-ident", "Train an identification model");
  sub->add_option("--features", a->features, "Feature CSV(s) from `features`")->required();
  sub->add_option("--method", a->method, "Classifier family")
      ->check(CLI::IsMember({"knn", "lda", "nn"}));
  sub->add_option("--config", a->config_path, "Pipeline config JSON");
  a->k_opt = sub->add_option("--k", a->k, "K-NN neighbour count");
  a->epochs_opt = sub->add_option("--epochs", a->epochs, "Fine-tuning epochs");
  a->pretrain_opt = sub->add_option("--pretrain-epochs", a->pretrain, "Autoencoder epochs");
  a->batch_opt = sub->add_option("--batch", a->batch, "Minibatch size");
  a->lr_opt = sub->add_option("--lr", a->lr, "SGD learning rate");
  a->l2_opt = sub->add_option("--l2", a->l2, "Weight decay");
  a->rho_opt = sub->add_option("--rho", a->rho, "Sparsity target activation");
  a->beta_opt = sub->add_option("--beta", a->beta, "Sparsity penalty weight");
  a->seed_opt = sub->add_option("--seed", a->seed, "RNG seed");
  sub->add_option("--out", a->out, "Model JSON path")->required();
  sub->callback([a] { run_train_ident(*a); });
}

// ---------------------------------------------------------------------------
// eval-ident

struct EvalIdentArgs {
  std::vector<std::string> features;
  std::string model;
};

void run_eval_ident(const EvalIdentArgs& a) {
  const IdentModel model = IdentModel::load(a.model);
  const auto test = read_feature_files(a.features);
  std::vector<std::string> truth, pred;
  truth.reserve(test.size());
  pred.reserve(test.size());
  for (const auto& fv : test) {
    truth.push_back(fv.subject_id);
    try {
      pred.push_back(identify(model, fv).label);
    } catch (const Error&) {
      pred.push_back("");  // unclassifiable periods count against their class
    }
  }
  const Rates r = macro_rates(truth, pred);
  print_summary({{"command", "eval-ident"},
                 {"periods", test.size()},
                 {"tpr", r.tpr},
                 {"tnr", r.tnr},
                 {"bac", r.bac}});
}

void setup_eval_ident(CLI::App& app) {
  auto a = std::make_shared<EvalIdentArgs>();
  auto* sub = app.add_subcommand("eval-ident", "Score an identification model on features");
  sub->add_option("--features", a->features, "Test feature CSV(s)")->required();
  sub->add_option("--model", a->model, "Model JSON from `train-ident`")->required();
  sub->callback([a] { run_eval_ident(*a); });
}

// ---------------------------------------------------------------------------
// enroll / verify / eval-auth

struct AuthFlagArgs {
  std::string config_path;
  bool euclidean = false, single_cluster = false;
  double tau_pct = 0, density = 0;
  int grid = 0, min_periods = 0;
  CLI::Option *tau_opt = nullptr, *grid_opt = nullptr, *density_opt = nullptr,
              *minp_opt = nullptr;

  void add_flags(CLI::App* sub) {
    sub->add_option("--config", config_path, "Pipeline config JSON");
    sub->add_flag("--euclidean", euclidean, "Identity covariance instead of Mahalanobis");
    sub->add_flag("--single-cluster", single_cluster, "One cluster per morphology");
    tau_opt = sub->add_option("--tau-percentile", tau_pct, "Accept-threshold percentile");
    grid_opt = sub->add_option("--grid-cells", grid, "Clustering grid cells per dimension");
    density_opt = sub->add_option("--density-threshold", density, "Dense-cell cutoff");
    minp_opt = sub->add_option("--min-periods", min_periods, "Minimum enrollment periods");
  }

  EnrollOptions merged(const PipelineConfig& cfg) const {
    EnrollOptions opts;
    opts.mahalanobis = !euclidean;
    opts.multi_cluster = !single_cluster;
    opts.tau_percentile = tau_opt && tau_opt->count() ? tau_pct : cfg.tau_percentile;
    opts.grid_cells_per_dim = grid_opt && grid_opt->count() ? grid : cfg.grid_cells_per_dim;
    opts.density_threshold =
        density_opt && density_opt->count() ? density : cfg.density_threshold;
    if (minp_opt && minp_opt->count()) opts.min_enroll_periods = min_periods;
    return opts;
  }
};

struct EnrollArgs {
  AuthFlagArgs auth;
  std::vector<std::string> features;
  std::string subject, out;
};

void run_enroll(const EnrollArgs& a) {
  const PipelineConfig cfg = load_config(a.auth.config_path);
  const EnrollOptions opts = a.auth.merged(cfg);
  const auto all = read_feature_files(a.features);

  std::string subject = a.subject;
  if (subject.empty()) {
    for (const auto& fv : all) {
      if (subject.empty()) subject = fv.subject_id;
      else if (subject != fv.subject_id)
        throw Error(Err::InvalidSpec, "multiple subjects in input; pass --subject");
    }
  }
  std::vector<FeatureVector> train;
  for (const auto& fv : all)
    if (fv.subject_id == subject) train.push_back(fv);

  const AuthProfile profile = enroll(train, subject, opts);
  ensure_parent_dir(a.out);
  profile.save(a.out);

  std::size_t clusters = 0;
  json morphs = json::array();
  for (const auto& [m, mm] : profile.morphologies) {
    morphs.push_back(to_string(m));
    clusters += mm.clusters.size();
  }
  print_summary({{"command", "enroll"},
                 {"subject", subject},
                 {"periods", train.size()},
                 {"morphologies", morphs},
                 {"clusters", clusters},
                 {"file", a.out}});
}

void setup_enroll(CLI::App& app) {
  auto a = std::make_shared<EnrollArgs>();
  auto* sub = app.add_subcommand("enroll", "Build an authentication profile for one subject");
  sub->add_option("--features", a->features, "Feature CSV(s)")->required();
  sub->add_option("--subject", a->subject, "Subject id (default: sole id in input)");
  a->auth.add_flags(sub);
  sub->add_option("--out", a->out, "Profile JSON path")->required();
  sub->callback([a] { run_enroll(*a); });
}

struct VerifyArgs {
  std::string profile, period;
};

void run_verify(const VerifyArgs& a) {
  const AuthProfile profile = AuthProfile::load(a.profile);
  const auto fvs = read_features_csv(a.period);
  if (fvs.empty()) throw Error(Err::EmptyInput, "no feature rows in " + a.period);
  // Single-period verification: the first row speaks for the file.
  const VerifyResult res = verify(profile, fvs.front());
  print_summary({{"accept", res.accept}, {"distance", res.distance}});
}

void setup_verify(CLI::App& app) {
  auto a = std::make_shared<VerifyArgs>();
  auto* sub = app.add_subcommand("verify", "Check one period against a profile");
  sub->add_option("--profile", a->profile, "Profile JSON from `enroll`")->required();
  sub->add_option("--period", a->period, "Feature CSV; the first row is verified")->required();
  sub->callback([a] { run_verify(*a); });
}

struct EvalAuthArgs {
  AuthFlagArgs auth;
  std::vector<std::string> features;
  double train_fraction = 0;
  CLI::Option* frac_opt = nullptr;
};

void run_eval_auth(const EvalAuthArgs& a) {
  const PipelineConfig cfg = load_config(a.auth.config_path);
  EnrollOptions opts = a.auth.merged(cfg);
  const double frac =
      a.frac_opt && a.frac_opt->count() ? a.train_fraction : cfg.train_fraction;
  if (!(frac > 0.0 && frac < 1.0))
    throw Error(Err::InvalidSpec, "train fraction must lie in (0, 1)");
  if (!(a.auth.minp_opt && a.auth.minp_opt->count()))
    opts.min_enroll_periods =
        static_cast<int>(std::floor(frac * static_cast<double>(cfg.min_subset_periods)));

  const auto all = read_feature_files(a.features);
  std::vector<std::string> order;
  std::map<std::string, std::vector<FeatureVector>> by_subject;
  for (const auto& fv : all) {
    if (by_subject.find(fv.subject_id) == by_subject.end()) order.push_back(fv.subject_id);
    by_subject[fv.subject_id].push_back(fv);
  }
  if (order.size() < 2)
    throw Error(Err::TooFewSubjects, "authentication evaluation needs at least two subjects");

  std::map<std::string, std::vector<FeatureVector>> test_by;
  std::map<std::string, AuthProfile> profiles;
  for (const auto& s : order) {
    const auto& rows = by_subject[s];
    const auto split =
        static_cast<std::size_t>(std::floor(frac * static_cast<double>(rows.size())));
    std::vector<FeatureVector> train(rows.begin(), rows.begin() + split);
    test_by[s].assign(rows.begin() + split, rows.end());
    try {
      profiles.emplace(s, enroll(train, s, opts));
    } catch (const Error&) {
      // subjects that cannot enroll simply do not contribute a profile
    }
  }
  if (profiles.empty()) throw Error(Err::InsufficientData, "no subject could be enrolled");

  double tpr_sum = 0, tnr_sum = 0;
  int tpr_n = 0, tnr_n = 0;
  for (const auto& [s, profile] : profiles) {
    long long tp = 0, fn = 0, tn = 0, fp = 0;
    for (const auto& [other, rows] : test_by) {
      for (const auto& fv : rows) {
        const bool accept = verify(profile, fv).accept;
        if (other == s) accept ? ++tp : ++fn;
        else accept ? ++fp : ++tn;
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
  const double tpr = tpr_n > 0 ? tpr_sum / tpr_n : std::numeric_limits<double>::quiet_NaN();
  const double tnr = tnr_n > 0 ? tnr_sum / tnr_n : std::numeric_limits<double>::quiet_NaN();
  print_summary({{"command", "eval-auth"},
                 {"subjects", order.size()},
                 {"enrolled", profiles.size()},
                 {"tpr", tpr},
                 {"tnr", tnr},
                 {"bac", 0.5 * (tpr + tnr)}});
}

void setup_eval_auth(CLI::App& app) {
  auto a = std::make_shared<EvalAuthArgs>();
  auto* sub = app.add_subcommand("eval-auth", "Enroll-and-verify evaluation over features");
  sub->add_option("--features", a->features, "Feature CSV(s), all subjects")->required();
  a->auth.add_flags(sub);
  a->frac_opt = sub->add_option("--train-fraction", a->train_fraction, "Enrollment fraction");
  sub->callback([a] { run_eval_auth(*a); });
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string data, out, config_path;
  std::uint64_t seed = 0;
  double train_fraction = 0, tau_pct = 0;
  int k = 0, min_subset = 0, nn_epochs = 0, nn_pretrain = 0;
  CLI::Option *seed_opt = nullptr, *frac_opt = nullptr, *tau_opt = nullptr, *k_opt = nullptr,
              *minstage_opt = nullptr, *epochs_opt = nullptr, *pretrain_opt = nullptr;
};

void run_report(const ReportArgs& a) {
  bool file_seed = false;
  PipelineConfig cfg = load_config(a.config_path, &file_seed);
  if (a.frac_opt->count()) cfg.train_fraction = a.train_fraction;
  if (a.tau_opt->count()) cfg.tau_percentile = a.tau_pct;
  if (a.k_opt->count()) cfg.knn_k = a.k;
  if (a.minstage_opt->count()) cfg.min_subset_periods = a.min_subset;
  if (a.epochs_opt->count()) cfg.nn.epochs = a.nn_epochs;
  if (a.pretrain_opt->count()) cfg.nn.pretrain_epochs = a.nn_pretrain;
  cfg.seed = resolve_seed(a.seed_opt, a.seed,
                          file_seed ? std::optional<std::uint64_t>(cfg.seed) : std::nullopt);

  const auto signals = load_signal_dir(a.data);

  BenchmarkOptions bopts;
  bopts.seed = cfg.seed;
  bopts.train_fraction = cfg.train_fraction;
  bopts.knn_k = cfg.knn_k;
  bopts.nn = cfg.nn;
  bopts.nn.seed = cfg.seed;
  bopts.tau_percentile = cfg.tau_percentile;
  bopts.min_subset_periods = cfg.min_subset_periods;

  const Dataset fixed = build_dataset(signals, PipelineKind::Fixed, cfg.plan, cfg.filter, cfg.seg);
  const Dataset harmonic =
      build_dataset(signals, PipelineKind::Harmonic, cfg.plan, cfg.filter, cfg.seg);
  const auto rows = run_full_benchmark(fixed, harmonic, bopts);

  ensure_dir(a.out);
  const std::string csv = join_path(a.out, "report.csv");
  const std::string js = join_path(a.out, "report.json");
  write_report_csv(rows, csv);
  write_report_json(rows, js);
  print_summary({{"command", "report"},
                 {"subjects", signals.size()},
                 {"rows", rows.size()},
                 {"seed", cfg.seed},
                 {"csv", csv},
                 {"json", js}});
}

void setup_report(CLI::App& app) {
  auto a = std::make_shared<ReportArgs>();
  auto* sub = app.add_subcommand("report", "Full benchmark matrix over a signal directory");
  sub->add_option("--data", a->data, "Directory of recordings (one per subject)")->required();
  sub->add_option("--config", a->config_path, "Pipeline config JSON");
  a->seed_opt = sub->add_option("--seed", a->seed, "RNG seed");
  a->frac_opt = sub->add_option("--train-fraction", a->train_fraction, "Chronological split");
  a->tau_opt = sub->add_option("--tau-percentile", a->tau_pct, "Accept-threshold percentile");
  a->k_opt = sub->add_option("--k", a->k, "K-NN neighbour count");
  a->minstage_opt =
      sub->add_option("--min-subset-periods", a->min_subset, "Subset inclusion minimum");
  a->epochs_opt = sub->add_option("--nn-epochs", a->nn_epochs, "NN fine-tuning epochs");
  a->pretrain_opt =
      sub->add_option("--nn-pretrain-epochs", a->nn_pretrain, "NN autoencoder epochs");
  sub->add_option("--out", a->out, "Output directory")->required();
  sub->callback([a] { run_report(*a); });
}

}  // namespace
}  // namespace cardioid::cli

int main(int argc, char** argv) {
  CLI::App app{"PPG biometric pipeline: filtering, segmentation, identification, authentication"};
  app.require_subcommand(1);
  int jobs = 1;
  app.add_option("--jobs", jobs, "Worker cap for stages that parallelize (currently none)")
      ->check(CLI::PositiveNumber);

  cardioid::cli::setup_synth(app);
  cardioid::cli::setup_ingest(app);
  cardioid::cli::setup_filter(app);
  cardioid::cli::setup_segment(app);
  cardioid::cli::setup_features(app);
  cardioid::cli::setup_train_ident(app);
  cardioid::cli::setup_eval_ident(app);
  cardioid::cli::setup_enroll(app);
  cardioid::cli::setup_verify(app);
  cardioid::cli::setup_eval_auth(app);
  cardioid::cli::setup_report(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help and friends
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const cardioid::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include "vru/cli.hpp"

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vru/checkpoint.hpp"
#include "vru/dataset.hpp"
#include "vru/metrics.hpp"
#include "vru/parallel.hpp"
#include "vru/pipeline.hpp"
#include "vru/raw_io.hpp"
#include "vru/report.hpp"
#include "vru/synth.hpp"
#include "vru/training.hpp"

namespace vru {

namespace fs = std::filesystem;

namespace {

// Failure inside a command that should exit with status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("short write to '" + path.string() + "'");
}

std::string case_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "case_%04zu", i);
  return buf;
}

std::vector<CaseRecord> select_split(const std::vector<CaseRecord>& all, Split split) {
  std::vector<CaseRecord> out;
  for (const auto& r : all) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

std::vector<LoadedCase> load_cases(const std::vector<CaseRecord>& records, std::size_t threads) {
  std::vector<LoadedCase> out(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) { out[i] = load_case(records[i]); });
  return out;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::size_t count = 10;
  std::uint64_t seed = 1;
  std::string dims = "32x32x32";
  std::size_t lesions_min = 1;
  std::size_t lesions_max = 2;
  double radius_min = 3.0;
  double radius_max = 6.0;
  double contrast = 0.4;
  double noise = 0.02;
  double test3d_ratio = 0.2;
  double test2d_ratio = 0.2;
};

int cmd_synth(const SynthArgs& a) {
  const auto dims = parse_dims(a.dims);
  if (!dims) throw UsageError("--dims '" + a.dims + "' is not XxYxZ");
  if (dims->x < kMinSynthDim || dims->y < kMinSynthDim || dims->z < kMinSynthDim) {
    throw UsageError("--dims " + dims->str() + " must be at least " + std::to_string(kMinSynthDim) + " per axis");
  }
  if (a.lesions_max < a.lesions_min) throw UsageError("--lesions-max must be >= --lesions-min");
  const fs::path dir(a.out);
  ensure_dir(dir);

  std::vector<Split> splits;
  if (a.count > 0) splits = split_cases(a.count, a.test3d_ratio, a.seed, a.test2d_ratio);
  std::vector<CaseRecord> records;
  Rng counts(a.seed);
  for (std::size_t i = 0; i < a.count; ++i) {
    SynthSpec spec;
    spec.lesion_count = a.lesions_min + counts.below(a.lesions_max - a.lesions_min + 1);
    spec.radius_min = a.radius_min;
    spec.radius_max = a.radius_max;
    spec.lesion_contrast = a.contrast;
    spec.noise_sigma = a.noise;
    Volume v = synth_volume(a.seed * 1000003ull + i, *dims, spec);
    const std::string id = case_name(i);
    Mask3 mask = std::move(*v.mask);
    v.mask.reset();
    write_raw(v, (dir / (id + ".raw")).string());
    write_mask_raw(mask, (dir / (id + "_mask.raw")).string());
    records.push_back({id, id + ".raw", id + "_mask.raw", splits[i]});
  }
  write_manifest((dir / "manifest.tsv").string(), records);
  std::cout << "wrote " << a.count << " cases to " << dir.string() << "\n";
  return 0;
}

// ---- slice ----------------------------------------------------------------

struct SliceArgs {
  std::string manifest;
  std::vector<std::string> planes;
  std::string split = "all";
  bool balance = false;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_slice(const SliceArgs& a) {
  const auto records = read_manifest(a.manifest);
  std::vector<Plane> planes;
  for (const auto& p : a.planes) planes.push_back(parse_plane(p));
  if (planes.empty()) planes.assign(kAllPlanes.begin(), kAllPlanes.end());

  std::vector<CaseRecord> chosen;
  for (const auto& r : records) {
    if (a.split == "all" || r.split == parse_split(a.split)) chosen.push_back(r);
  }
  std::vector<SliceDataset> per_plane(planes.size());
  for (const auto& r : chosen) {
    const Mask3 m = load_mask(r.mask_path);
    for (std::size_t i = 0; i < planes.size(); ++i) append_slices(per_plane[i], r.case_id, m, planes[i]);
  }
  std::ofstream list;
  if (!a.out.empty()) {
    list.open(a.out, std::ios::trunc);
    if (!list) throw std::runtime_error("cannot write '" + a.out + "'");
    list << "# case_id\tplane\tslice\thas_lesion\n";
  }
  std::printf("%-10s %8s %8s %8s\n", "plane", "lesion", "normal", "total");
  for (std::size_t i = 0; i < planes.size(); ++i) {
    SliceDataset ds = a.balance ? balance_for_classification(per_plane[i], a.seed) : per_plane[i];
    std::printf("%-10s %8zu %8zu %8zu\n", to_string(planes[i]).c_str(), ds.lesion_count(), ds.normal_count(),
                ds.size());
    if (list.is_open()) {
      for (const auto& e : ds.entries) {
        list << e.case_id << '\t' << to_string(e.plane) << '\t' << e.slice_index << '\t' << (e.has_lesion ? 1 : 0)
             << '\n';
      }
    }
  }
  return 0;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string spec;
  std::string plane;
  std::string task;
  std::string out = ".";
  std::string checkpoint;
  std::size_t epochs = 50;
  std::size_t batch = 16;
  std::optional<double> lr;
  std::size_t patience = 10;
  double min_delta = 0.0;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string precision = "f32";
};

template <typename T>
int train_impl(const TrainArgs& a, const ArchSpec& spec, Plane plane) {
  const bool classify = a.task == kClassifyTask;
  const auto records = read_manifest(a.manifest);
  const auto train_cases = load_cases(select_split(records, Split::train2d), a.threads);
  const auto val_cases = load_cases(select_split(records, Split::test2d), a.threads);
  if (train_cases.empty()) throw std::runtime_error("manifest has no train2d cases");

  SampleSet<T> train;
  SampleSet<T> val;
  if (classify) {
    train = classification_samples<T>(train_cases, plane, spec, a.seed + 2);
    if (!val_cases.empty()) val = classification_samples<T>(val_cases, plane, spec, a.seed + 3);
  } else {
    train = segmentation_samples<T>(train_cases, plane, spec);
    if (!val_cases.empty()) val = segmentation_samples<T>(val_cases, plane, spec);
  }

  ModelParams<T> model = build_model<T>(spec, a.seed);
  FitConfig fc;
  fc.max_epochs = a.epochs;
  fc.batch_size = a.batch;
  fc.learning_rate = a.lr ? *a.lr : (classify ? 1e-5 : 1e-3);
  fc.patience = a.patience;
  fc.min_delta = a.min_delta;
  fc.shuffle_seed = a.seed + 1;
  fc.threads = a.threads;
  std::printf("train %s-%s: %zu train / %zu val samples, %zu params, lr %g, batch %zu, %s\n",
              to_string(plane).c_str(), a.task.c_str(), train.size(), val.size(), model.parameter_count(),
              fc.learning_rate, fc.batch_size, a.precision.c_str());
  const FitLog log = fit(model, train, val, fc);

  const fs::path dir(a.out);
  ensure_dir(dir);
  const std::string stem = to_string(plane) + "-" + a.task;
  const fs::path ckpt = a.checkpoint.empty() ? dir / (stem + ".ckpt") : fs::path(a.checkpoint);
  save_checkpoint(model, ckpt.string());

  std::ostringstream text;
  text << "# epoch\ttrain_loss\tval_loss\n";
  for (const auto& e : log.epochs) {
    char line[128];
    std::snprintf(line, sizeof line, "%zu\t%.8g\t%.8g\n", e.epoch, e.train_loss, e.val_loss);
    text << line;
    std::fputs(line, stdout);
  }
  if (log.stopped_at) text << "# stopped_at " << *log.stopped_at << "\n";
  write_text(ckpt.string() + ".log.tsv", text.str());
  if (log.stopped_at) std::printf("early stop at epoch %zu\n", *log.stopped_at);
  std::printf("wrote %s\n", ckpt.string().c_str());
  return 0;
}

int cmd_train(const TrainArgs& a) {
  const Plane plane = parse_plane(a.plane);
  if (a.task != kClassifyTask && a.task != kSegmentTask) {
    throw UsageError("--task must be classify or segment");
  }
  const ArchSpec spec = ArchSpec::load(a.spec);
  const ModelKind want = a.task == kClassifyTask ? ModelKind::classifier : ModelKind::segmenter;
  if (spec.kind != want) {
    throw std::runtime_error("spec '" + a.spec + "' describes a " + to_string(spec.kind) + ", task " + a.task +
                             " needs a " + to_string(want));
  }
  if (a.precision == "f64") return train_impl<double>(a, spec, plane);
  return train_impl<float>(a, spec, plane);
}

// ---- predict --------------------------------------------------------------

struct PredictArgs {
  std::string models = ".";
  std::map<std::string, std::string> overrides;
  std::string input;
  std::string manifest;
  std::string out;
  int vote_threshold = 3;
  double gate = 0.5;
  float tau = 0.5f;
  std::size_t min_pixels = 1;
  bool no_aggregate = false;
  std::size_t threads = 1;
  std::string precision = "f32";
};

nlohmann::json plane_report(const PlaneResult& r) {
  std::size_t combined = 0;
  for (auto c : r.combined_label) combined += c;
  std::size_t voxels = 0;
  for (auto m : r.mask.data) voxels += m;
  return {{"slices", r.gate_open.size()},
          {"gate_open", r.gate_open_count()},
          {"segmenter_calls", r.segmenter_calls},
          {"combined_positive", combined},
          {"mask_voxels", voxels},
          {"seconds", r.seconds}};
}

template <typename T>
int predict_impl(const PredictArgs& a) {
  std::map<std::string, fs::path> paths;
  std::vector<std::string> missing;
  for (Plane p : kAllPlanes) {
    for (const char* task : {kClassifyTask, kSegmentTask}) {
      const std::string key = to_string(p) + "-" + task;
      const auto it = a.overrides.find(key);
      const fs::path path = it != a.overrides.end() && !it->second.empty() ? fs::path(it->second)
                                                                          : fs::path(a.models) / (key + ".ckpt");
      if (!fs::is_regular_file(path)) missing.push_back(key + " (" + path.string() + ")");
      paths[key] = path;
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing checkpoints:";
    for (const auto& m : missing) msg += " " + m;
    throw std::runtime_error(msg);
  }
  std::vector<PlaneModelPair<T>> pairs;
  for (Plane p : kAllPlanes) {
    const std::string name = to_string(p);
    pairs.emplace_back(p, load_checkpoint<T>(paths[name + "-" + kClassifyTask].string()),
                       load_checkpoint<T>(paths[name + "-" + kSegmentTask].string()));
  }
  std::vector<const SliceModels*> view;
  for (const auto& pr : pairs) view.push_back(&pr);

  PipelineConfig cfg;
  cfg.gate_threshold = a.gate;
  cfg.pixel_threshold = a.tau;
  cfg.rule.vote_threshold = a.vote_threshold;
  cfg.min_pixels = a.min_pixels;
  cfg.threads = a.threads;
  cfg.rule.validate();

  std::vector<std::pair<std::string, std::string>> jobs;  // (case_id, volume path)
  if (!a.manifest.empty()) {
    for (const auto& r : select_split(read_manifest(a.manifest), Split::test3d)) jobs.emplace_back(r.case_id, r.volume_path);
  } else {
    jobs.emplace_back(fs::path(a.input).stem().string(), a.input);
  }
  const fs::path root(a.out);
  ensure_dir(root);
  for (const auto& [id, path] : jobs) {
    const fs::path dir = a.manifest.empty() ? root : root / id;
    ensure_dir(dir);
    Volume v = load_volume(path);
    v.mask.reset();
    const PipelineResult res = process_volume(view, v, cfg);
    nlohmann::json report{{"case_id", id},
                          {"dims", {res.dims.x, res.dims.y, res.dims.z}},
                          {"gate_threshold", cfg.gate_threshold},
                          {"pixel_threshold", cfg.pixel_threshold},
                          {"vote_threshold", cfg.rule.vote_threshold},
                          {"min_pixels", cfg.min_pixels},
                          {"precision", a.precision},
                          {"planes", nlohmann::json::object()}};
    for (Plane p : kAllPlanes) {
      write_mask_raw(res.plane(p).mask, (dir / (to_string(p) + ".mask")).string());
      report["planes"][to_string(p)] = plane_report(res.plane(p));
    }
    if (!a.no_aggregate) {
      write_mask_raw(res.aggregated, (dir / "aggregated.mask").string());
      std::size_t voxels = 0;
      for (auto m : res.aggregated.data) voxels += m;
      report["aggregated_voxels"] = voxels;
    }
    write_text(dir / "report.json", report.dump(2) + "\n");
    std::printf("%s: %s\n", id.c_str(), dir.string().c_str());
  }
  return 0;
}

int cmd_predict(const PredictArgs& a) {
  if (a.input.empty() == a.manifest.empty()) throw UsageError("give exactly one of --input or --manifest");
  if (a.vote_threshold < 1 || a.vote_threshold > 3) throw UsageError("--vote-threshold must be 1, 2 or 3");
  if (a.precision == "f64") return predict_impl<double>(a);
  return predict_impl<float>(a);
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string truth;
  std::string pred;
  std::string baseline;
  std::string manifest;
  std::string pred_dir;
  std::string json;
  std::string std_mode = "population";
};

CaseMetrics eval_case(const std::string& id, const std::string& pred_path, const Mask3& truth) {
  const Mask3 pred = load_mask(pred_path);
  if (pred.dims != truth.dims) {
    throw std::runtime_error("case '" + id + "': prediction dims " + pred.dims.str() + " != truth dims " +
                             truth.dims.str());
  }
  return evaluate_volume(pred, truth, id);
}

int cmd_eval(const EvalArgs& a) {
  const StdMode mode = a.std_mode == "sample" ? StdMode::sample : StdMode::population;
  std::vector<ReportSection> sections;
  if (!a.manifest.empty()) {
    if (a.pred_dir.empty()) throw UsageError("--manifest needs --pred-dir");
    const auto cases = select_split(read_manifest(a.manifest), Split::test3d);
    std::vector<std::string> names{"aggregated"};
    for (Plane p : kAllPlanes) names.push_back(to_string(p));
    std::vector<std::string> files{"aggregated.mask"};
    for (Plane p : kAllPlanes) files.push_back(to_string(p) + ".mask");
    for (std::size_t s = 0; s < names.size(); ++s) {
      bool all = !cases.empty();
      for (const auto& c : cases) all = all && fs::exists(fs::path(a.pred_dir) / c.case_id / files[s]);
      if (!all) continue;
      ReportSection sec{s == 0 ? "with aggregation" : "without aggregation (" + names[s] + ")", {}};
      for (const auto& c : cases) {
        const Mask3 truth = load_mask(c.mask_path);
        sec.cases.push_back(eval_case(c.case_id, (fs::path(a.pred_dir) / c.case_id / files[s]).string(), truth));
      }
      sections.push_back(std::move(sec));
    }
    if (sections.empty()) throw std::runtime_error("no predictions found under '" + a.pred_dir + "'");
  } else {
    if (a.truth.empty() || a.pred.empty()) throw UsageError("give --truth and --pred, or --manifest and --pred-dir");
    const Mask3 truth = load_mask(a.truth);
    const std::string id = fs::path(a.truth).stem().string();
    sections.push_back({a.baseline.empty() ? "prediction" : "with aggregation", {eval_case(id, a.pred, truth)}});
    if (!a.baseline.empty()) sections.push_back({"without aggregation", {eval_case(id, a.baseline, truth)}});
  }
  std::fputs(report_table(sections, mode).c_str(), stdout);
  if (!a.json.empty()) write_text(a.json, report_json(sections, mode).dump(2) + "\n");
  return 0;
}

}  // namespace

std::optional<Dims> parse_dims(const std::string& text) {
  std::string t = text;
  for (auto& ch : t) {
    if (ch == 'x' || ch == 'X' || ch == ',') ch = ' ';
  }
  std::istringstream in(t);
  long long v[3];
  for (auto& x : v) {
    if (!(in >> x) || x <= 0) return std::nullopt;
  }
  std::string rest;
  if (in >> rest) return std::nullopt;
  for (char ch : text) {
    if (!(std::isdigit(static_cast<unsigned char>(ch)) || ch == 'x' || ch == 'X' || ch == ',')) return std::nullopt;
  }
  return Dims{static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]), static_cast<std::size_t>(v[2])};
}

std::string checkpoint_name(Plane plane, const std::string& task) { return to_string(plane) + "-" + task + ".ckpt"; }

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Tri-plane lesion segmentation toolkit"};
  app.require_subcommand(1);
  const std::size_t default_threads = default_thread_count();
  const std::vector<std::string> planes{"axial", "sagittal", "coronal"};

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "generate synthetic phantom cases and a manifest");
  synth->add_option("--out", sa.out, "output directory")->required();
  synth->add_option("-n,--count", sa.count, "number of cases");
  synth->add_option("--seed", sa.seed, "random seed");
  synth->add_option("--dims", sa.dims, "volume dims XxYxZ");
  synth->add_option("--lesions-min", sa.lesions_min, "fewest lesions per case");
  synth->add_option("--lesions-max", sa.lesions_max, "most lesions per case");
  synth->add_option("--radius-min", sa.radius_min, "smallest lesion semi-axis (voxels)");
  synth->add_option("--radius-max", sa.radius_max, "largest lesion semi-axis (voxels)");
  synth->add_option("--contrast", sa.contrast, "lesion intensity drop");
  synth->add_option("--noise", sa.noise, "gaussian noise sigma");
  synth->add_option("--test3d-ratio", sa.test3d_ratio, "fraction of cases held out for 3D evaluation");
  synth->add_option("--test2d-ratio", sa.test2d_ratio, "fraction of the 2D pool used for validation");

  SliceArgs sl;
  auto* slice = app.add_subcommand("slice", "tally lesion/normal slices per plane");
  slice->add_option("--manifest", sl.manifest)->required();
  slice->add_option("--plane", sl.planes, "plane(s), default all")->check(CLI::IsMember(planes));
  slice->add_option("--split", sl.split, "train2d, test2d, test3d or all")
      ->check(CLI::IsMember({"all", "train2d", "test2d", "test3d"}));
  slice->add_flag("--balance", sl.balance, "undersample the majority class");
  slice->add_option("--seed", sl.seed, "balancing seed");
  slice->add_option("--out", sl.out, "write the slice list as TSV");

  TrainArgs ta;
  ta.threads = default_threads;
  double lr = 0.0;
  auto* train = app.add_subcommand("train", "train one plane's classifier or segmenter");
  train->add_option("--manifest", ta.manifest)->required();
  train->add_option("--spec", ta.spec, "architecture spec file")->required();
  train->add_option("--plane", ta.plane)->required()->check(CLI::IsMember(planes));
  train->add_option("--task", ta.task)->required()->check(CLI::IsMember({kClassifyTask, kSegmentTask}));
  train->add_option("--out", ta.out, "directory for <plane>-<task>.ckpt");
  train->add_option("--checkpoint", ta.checkpoint, "explicit checkpoint path");
  train->add_option("--epochs", ta.epochs, "maximum epochs");
  train->add_option("--batch", ta.batch, "batch size")->check(CLI::PositiveNumber);
  auto* lr_opt = train->add_option("--lr", lr, "learning rate (default 1e-5 classify, 1e-3 segment)");
  train->add_option("--patience", ta.patience, "early-stopping patience (epochs)");
  train->add_option("--min-delta", ta.min_delta, "minimum validation-loss improvement");
  train->add_option("--seed", ta.seed, "seed for init, shuffling and balancing");
  train->add_option("--threads", ta.threads, "worker threads")->check(CLI::PositiveNumber);
  train->add_option("--precision", ta.precision)->check(CLI::IsMember({"f32", "f64"}));

  PredictArgs pa;
  pa.threads = default_threads;
  auto* predict = app.add_subcommand("predict", "run the tri-plane pipeline on volumes");
  predict->add_option("--models", pa.models, "directory holding the six checkpoints");
  for (const auto& p : planes) {
    for (const char* task : {kClassifyTask, kSegmentTask}) {
      const std::string key = p + "-" + task;
      predict->add_option("--" + key, pa.overrides[key], "override checkpoint path");
    }
  }
  predict->add_option("--input", pa.input, "volume file");
  predict->add_option("--manifest", pa.manifest, "predict every test3d case of a manifest");
  predict->add_option("--out", pa.out, "output directory")->required();
  predict->add_option("--vote-threshold", pa.vote_threshold, "planes that must agree (1-3)");
  predict->add_option("--gate", pa.gate, "classifier gate threshold");
  predict->add_option("--tau", pa.tau, "segmentation pixel threshold");
  predict->add_option("--min-pixels", pa.min_pixels, "positive pixels for a combined positive");
  predict->add_flag("--no-aggregate", pa.no_aggregate, "write per-plane masks only");
  predict->add_option("--threads", pa.threads, "worker threads")->check(CLI::PositiveNumber);
  predict->add_option("--precision", pa.precision)->check(CLI::IsMember({"f32", "f64"}));

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "score predicted masks against ground truth");
  eval->add_option("--truth", ea.truth, "truth mask file");
  eval->add_option("--pred", ea.pred, "predicted mask file");
  eval->add_option("--baseline", ea.baseline, "no-aggregation mask for a second section");
  eval->add_option("--manifest", ea.manifest, "score every test3d case");
  eval->add_option("--pred-dir", ea.pred_dir, "directory written by predict --manifest");
  eval->add_option("--json", ea.json, "write the machine-readable report");
  eval->add_option("--std", ea.std_mode, "population or sample")->check(CLI::IsMember({"population", "sample"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*synth) return cmd_synth(sa);
    if (*slice) return cmd_slice(sl);
    if (*train) {
      if (*lr_opt) ta.lr = lr;
      return cmd_train(ta);
    }
    if (*predict) return cmd_predict(pa);
    if (*eval) return cmd_eval(ea);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace vru

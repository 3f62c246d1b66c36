#include "stressprog/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stressprog/checkpoint.hpp"
#include "stressprog/errors.hpp"
#include "stressprog/evaluation.hpp"
#include "stressprog/features.hpp"
#include "stressprog/labelling.hpp"
#include "stressprog/manifest.hpp"
#include "stressprog/pipeline.hpp"
#include "stressprog/segmentation.hpp"
#include "stressprog/training.hpp"
#include "stressprog/wav.hpp"

namespace stressprog {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string out;
  std::string manifest;
  std::string features = "mfcc";
  bool deltas = false;
  std::string pooling = "mean";
  // labelling
  int n = 4;
  double lambda = 0.8;
  double tau = 0.5;
  // segmentation / augmentation
  double window_s = 10.0;
  double hop_s = 5.0;
  double gap_s = 0.0;
  // training
  std::string arch = "lstm";
  std::uint64_t seed = 7;
  int epochs = 0;  // 0: architecture default
  int iterations = 1000;
  int batch_size = 16;
  double learning_rate = 0.001;
  double teacher_forcing = 0.8;
  int patience = 5;
  double lr_decay = 0.5;
  int lr_decay_every = 5;
  int hidden = 128;
  int heads = 4;
  int layers = 2;
  int context_layers = 1;
  int ff_dim = 256;
  double dropout = 0.3;
  // evaluation
  std::string ckpt;
  std::vector<std::string> ckpts;
  std::vector<std::string> feature_list;
  std::string level = "sequence";
  std::string split = "test";
  std::string ns = "0..5";
  std::vector<double> lambdas{0.01, 0.1, 0.8, 1.0};
  int tolerance = 0;
};

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  try {
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
      const int lo = std::stoi(text.substr(0, dots));
      const int hi = std::stoi(text.substr(dots + 2));
      if (hi < lo) throw UsageError("empty range '" + text + "'");
      for (int v = lo; v <= hi; ++v) out.push_back(v);
      return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw UsageError("bad integer '" + item + "'");
    }
  } catch (const std::logic_error&) {
    throw UsageError("expected a list like '2,3,4' or a range like '0..5', got '" + text + "'");
  }
  if (out.empty()) throw UsageError("empty list '" + text + "'");
  return out;
}

// key=value file; values only fill options the command line left unset.
void apply_config_file(CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  const auto items = CLI::ConfigINI().from_config(in);
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == sub->get_name())) {
      throw UsageError("config section '" + item.parents[0] + "' does not match command '" + sub->get_name() + "'");
    }
    std::string key = item.name;
    for (auto& c : key) c = c == '_' ? '-' : c;
    if (key == "config") continue;
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) throw UsageError("unknown config key '" + item.name + "' for " + sub->get_name());
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    opt->run_callback();
  }
}

fs::path run_dir(const Options& o, const std::string& command) {
  fs::path dir;
  if (!o.out.empty()) {
    dir = o.out;
  } else {
    const char* base = std::getenv(kRunDirEnv);
    dir = fs::path(base != nullptr && *base != '\0' ? base : "runs") / command;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create run directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  return f;
}

void write_text(const fs::path& path, const std::string& text) {
  auto f = open_out(path);
  f << text;
  if (!f) throw DataError("write failed: " + path.string());
}

std::vector<ManifestRecord> manifest(const Options& o) {
  if (o.manifest.empty()) throw UsageError("--manifest is required");
  return read_manifest(o.manifest);
}

LabellingConfig labelling(const Options& o) {
  LabellingConfig c{o.n, o.lambda, o.tau};
  c.validate();
  return c;
}

FeatureSource feature_source(const Options& o, const std::string& spec) {
  FeatureSource s = FeatureSource::parse(spec);
  s.mfcc.deltas = o.deltas;
  if (o.pooling == "mean") {
    s.mfcc.pooling = Pooling::Mean;
  } else if (o.pooling == "mean_std") {
    s.mfcc.pooling = Pooling::MeanStd;
  } else {
    throw UsageError("pooling must be 'mean' or 'mean_std'");
  }
  return s;
}

json code_json(const std::optional<VadCode>& code) { return code ? json(code->to_string()) : json(nullptr); }

std::string report_line(const EvalReport& r) {
  const auto& c = r.confusion;
  return "accuracy " + fmt6(r.accuracy) + ", F1 " + fmt6(r.f1) + " over " + std::to_string(r.count) + " (TP " +
         std::to_string(c.tp) + ", FP " + std::to_string(c.fp) + ", TN " + std::to_string(c.tn) + ", FN " +
         std::to_string(c.fn) + ")";
}

// ---- commands ----

std::string cmd_segment(const Options& o, const fs::path& dir) {
  const auto records = manifest(o);
  const WindowSpec spec{o.window_s, o.hop_s};
  auto f = open_out(dir / "windows.jsonl");
  std::size_t total = 0;
  for (const auto& r : records) {
    for (const auto& w : record_windows(r, spec)) {
      json j;
      j["utterance_id"] = r.utterance_id;
      j["index"] = w.index;
      j["start_s"] = w.start_s;
      j["end_s"] = w.end_s;
      j["label"] = code_json(w.label);
      f << j.dump() << '\n';
      ++total;
    }
  }
  return std::to_string(records.size()) + " recordings -> " + std::to_string(total) + " windows\n";
}

std::string cmd_augment(const Options& o, const fs::path& dir) {
  const auto records = manifest(o);
  if (!(o.gap_s >= 0.0)) throw UsageError("--gap must be >= 0");
  // Groups keep manifest order; key = (split, speaker, text).
  std::vector<std::vector<const ManifestRecord*>> groups;
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    const std::string key = r.split + '\x1f' + r.speaker_id + '\x1f' + r.text_id;
    const auto [it, fresh] = index.emplace(key, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(&r);
  }
  fs::create_directories(dir / "audio");
  std::vector<ManifestRecord> out_records;
  std::size_t skipped = 0;
  for (const auto& group : groups) {
    if (group.size() < 2) {
      ++skipped;
      continue;
    }
    std::vector<AudioClip> clips;
    std::vector<VadCode> codes;
    std::string id;
    for (const auto* r : group) {
      if (r->spans.empty()) throw DataError("record '" + r->utterance_id + "' has no label span to augment with");
      const auto path = r->resolved_audio_path();
      if (!fs::exists(path)) throw DataError("missing audio file: " + path.string());
      const PcmAudio audio = read_wav(path);
      clips.push_back({audio.samples, audio.sample_rate, r->speaker_id, r->utterance_id, r->text_id});
      codes.push_back(r->spans.front().label);
      id += (id.empty() ? "" : "+") + r->utterance_id;
    }
    const AugmentedClip aug = concat_augment(clips, codes, o.gap_s);
    const std::string rel = "audio/" + id + ".wav";
    write_wav(dir / rel, aug.clip.samples, aug.clip.sample_rate);
    ManifestRecord rec;
    rec.audio_path = rel;
    rec.speaker_id = group.front()->speaker_id;
    rec.utterance_id = id;
    rec.text_id = group.front()->text_id;
    rec.spans = aug.spans;
    rec.split = group.front()->split;
    out_records.push_back(std::move(rec));
  }
  write_manifest(dir / "augmented.jsonl", out_records);
  return std::to_string(out_records.size()) + " augmented recordings written; " + std::to_string(skipped) +
         " singleton groups skipped\n";
}

std::string cmd_label(const Options& o, const fs::path& dir) {
  const auto records = manifest(o);
  const LabellingConfig cfg = labelling(o);
  auto f = open_out(dir / "labels.jsonl");
  std::size_t windows = 0, stressed = 0;
  for (const auto& r : records) {
    const auto w = record_windows(r);
    const auto codes = relabel_windows(w, cfg);
    for (std::size_t k = 0; k < w.size(); ++k) {
      json j;
      j["utterance_id"] = r.utterance_id;
      j["index"] = w[k].index;
      j["start_s"] = w[k].start_s;
      j["end_s"] = w[k].end_s;
      j["emotion"] = code_json(w[k].label);
      j["stress_code"] = code_json(codes[k]);
      j["stress"] = codes[k] ? json(is_stress(*codes[k])) : json(nullptr);
      f << j.dump() << '\n';
      if (codes[k]) {
        ++windows;
        stressed += is_stress(*codes[k]) ? 1 : 0;
      }
    }
  }
  return std::to_string(windows) + " labelled windows, " + std::to_string(stressed) + " stress (threshold T = " +
         fmt6(cfg.threshold()) + ")\n";
}

std::string cmd_extract(const Options& o, const fs::path& dir) {
  const auto records = manifest(o);
  const FeatureSource source = feature_source(o, o.features);
  std::optional<MfccExtractor> extractor;
  if (source.kind == FeatureSource::Kind::Mfcc) extractor.emplace(source.mfcc);
  std::size_t rows = 0;
  int dim = 0;
  for (const auto& r : records) {
    const Eigen::MatrixXd m = record_features(r, source, extractor ? &*extractor : nullptr);
    write_fseq(dir / (r.utterance_id + ".fseq"), m);
    rows += static_cast<std::size_t>(m.rows());
    dim = static_cast<int>(m.cols());
  }
  return std::to_string(records.size()) + " feature files, " + std::to_string(rows) + " windows, d=" +
         std::to_string(dim) + " (" + source.describe() + ")\n";
}

std::string cmd_train(const Options& o, const fs::path& dir, std::ostream& progress) {
  const auto records = manifest(o);
  const LabellingConfig lab = labelling(o);
  const FeatureSource source = feature_source(o, o.features);
  ModelShape shape;
  shape.arch = parse_architecture(o.arch);
  shape.hidden = o.hidden;
  shape.heads = o.heads;
  shape.layers = o.layers;
  shape.context_layers = o.context_layers;
  shape.ff_dim = o.ff_dim;
  shape.dropout = o.dropout;
  TrainConfig cfg = TrainConfig::defaults_for(shape.arch);
  if (o.epochs > 0) cfg.epochs = o.epochs;
  cfg.iterations_per_epoch = o.iterations;
  cfg.batch_size = o.batch_size;
  cfg.learning_rate = o.learning_rate;
  cfg.teacher_forcing_p = o.teacher_forcing;
  cfg.seed = o.seed;
  cfg.patience = o.patience;
  cfg.lr_decay_factor = o.lr_decay;
  cfg.lr_decay_interval = o.lr_decay_every;
  cfg.history = o.n;
  cfg.validate();

  const Dataset data = build_dataset(records, source, lab);
  if (data.train.empty()) throw DataError("manifest has no labelled training windows");
  if (data.val.empty()) throw DataError("manifest has no labelled validation windows");
  shape.input_dim = data.dim;
  shape.validate();

  auto metrics = open_out(dir / "metrics.csv");
  write_metrics_header(metrics);
  const TrainResult result = train(data.train, data.val, shape, cfg, [&](const MetricsRow& row) {
    write_metrics_row(metrics, row);
    metrics.flush();
    progress << "epoch " << row.epoch << "  train " << fmt6(row.train_loss) << "  val " << fmt6(row.val_loss)
             << "  acc " << fmt6(row.val_acc) << '\n';
  });
  save_checkpoint(dir / "model.spck", result.best);
  return std::string(architecture_name(shape.arch)) + " model, d=" + std::to_string(shape.input_dim) + ", " +
         std::to_string(result.best.parameter_count()) + " parameters\n" + std::to_string(result.log.size()) +
         " epochs" + (result.stopped_early ? " (early stop)" : "") + ", best epoch " +
         std::to_string(result.best_epoch) + " with validation loss " + fmt6(result.best_val_loss) + "\n";
}

std::string cmd_eval(const Options& o, const fs::path& dir) {
  if (o.ckpt.empty()) throw UsageError("--ckpt is required");
  if (!fs::exists(o.ckpt)) throw DataError("missing checkpoint: " + o.ckpt);
  const ModelParams params = load_checkpoint(o.ckpt);
  const auto records = manifest(o);
  const EvalLevel level = parse_eval_level(o.level);
  const Dataset data = build_dataset(records, feature_source(o, o.features), labelling(o));
  if (data.dim != params.shape.input_dim) {
    throw DataError("checkpoint expects d=" + std::to_string(params.shape.input_dim) + " but features have d=" +
                    std::to_string(data.dim));
  }
  const EvalReport r = evaluate(params, data.split(o.split), data.recording_truth, o.n, level);
  const auto& c = r.confusion;
  write_text(dir / "eval.csv", "level,split,accuracy,f1,count,tp,fp,tn,fn\n" + o.level + ',' + o.split + ',' +
                                   fmt6(r.accuracy) + ',' + fmt6(r.f1) + ',' + std::to_string(r.count) + ',' +
                                   std::to_string(c.tp) + ',' + std::to_string(c.fp) + ',' + std::to_string(c.tn) +
                                   ',' + std::to_string(c.fn) + '\n');
  return o.level + "-level " + o.split + ": " + report_line(r) + "\n";
}

std::string grid_text(const SweepGrid& g, const Eigen::MatrixXd& m) {
  std::string s = "  n \\ lambda";
  for (double l : g.lambdas) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%10g", l);
    s += buf;
  }
  s += '\n';
  for (std::size_t i = 0; i < g.ns.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "  %-10d", g.ns[i]);
    s += buf;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%9.1f%%", 100.0 * m(static_cast<Eigen::Index>(i), j));
      s += buf;
    }
    s += '\n';
  }
  return s;
}

std::string cmd_sweep(const Options& o, const fs::path& dir) {
  const auto records = manifest(o);
  SweepOptions opt;
  opt.ns = parse_int_list(o.ns);
  opt.lambdas = o.lambdas;
  opt.tau = o.tau;
  opt.tolerance = o.tolerance;
  if (opt.tolerance < 0) throw UsageError("--tolerance must be >= 0");
  const SweepGrid g = labelling_sweep(sweep_sequences(records), opt);
  {
    auto f = open_out(dir / "sweep_binary.csv");
    write_sweep_csv(f, g, false);
  }
  {
    auto f = open_out(dir / "sweep_exact.csv");
    write_sweep_csv(f, g, true);
  }
  return std::to_string(g.compared) + " reference windows compared (tau " + fmt6(o.tau) + ")\n" +
         "stress agreement:\n" + grid_text(g, g.binary) + "exact code agreement:\n" + grid_text(g, g.exact);
}

std::string cmd_ablate(const Options& o, const fs::path& dir) {
  const auto records = manifest(o);
  AblationSpec spec;
  for (const auto& c : o.ckpts) spec.checkpoints.emplace_back(c);
  spec.features = o.feature_list;
  if (spec.features.empty()) spec.features.assign(spec.checkpoints.size(), o.features);
  spec.ns = parse_int_list(o.ns);
  spec.lambda = o.lambda;
  spec.tau = o.tau;
  spec.split = o.split;
  spec.level = parse_eval_level(o.level);
  for (const auto& f : spec.features) feature_source(o, f);
  const auto cells = ablation_grid(records, spec);
  {
    auto f = open_out(dir / "ablation.csv");
    write_ablation_csv(f, cells);
  }
  std::string s;
  for (const auto& c : cells) {
    s += c.model + " [" + c.features + "] n=" + std::to_string(c.n) + ": " + report_line(c.report) + "\n";
  }
  return s;
}

void add_labelling_flags(CLI::App* s, Options& o) {
  s->add_option("--n", o.n, "Window history length")->capture_default_str()->check(CLI::NonNegativeNumber);
  s->add_option("--lambda", o.lambda, "Decay rate of past windows")->capture_default_str();
  s->add_option("--tau", o.tau, "Threshold as a fraction of the maximum weighted distance")->capture_default_str();
}

void add_feature_flags(CLI::App* s, Options& o) {
  s->add_option("--features", o.features, "mfcc or file:<dir> with <utterance_id>.fseq files")->capture_default_str();
  s->add_flag("--deltas", o.deltas, "Append MFCC delta coefficients");
  s->add_option("--pooling", o.pooling, "Frame pooling: mean or mean_std")->capture_default_str();
}

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help, Options& o,
                      bool needs_manifest = true) {
  CLI::App* s = app.add_subcommand(name, help);
  s->add_option("--config", o.config, "key=value file; flags override its values");
  s->add_option("--out", o.out, std::string("Output directory (default: $") + kRunDirEnv + "/" + name + ")");
  if (needs_manifest) s->add_option("--manifest", o.manifest, "JSON-lines manifest")->capture_default_str();
  return s;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Stress-progression labelling, training and evaluation", "stressprog"};
  app.require_subcommand(1, 1);

  auto* seg = add_command(app, "segment", "Slice recordings into 10 s windows with aligned labels", o);
  seg->add_option("--window", o.window_s, "Window length in seconds")->capture_default_str();
  seg->add_option("--hop", o.hop_s, "Hop in seconds")->capture_default_str();

  auto* aug = add_command(app, "augment", "Concatenate same-speaker, same-text clips into progressions", o);
  aug->add_option("--gap", o.gap_s, "Silence between clips in seconds")->capture_default_str();

  auto* lab = add_command(app, "label", "Relabel window emotions into stress-progression codes", o);
  add_labelling_flags(lab, o);

  auto* ext = add_command(app, "extract", "Write per-window feature files", o);
  add_feature_flags(ext, o);

  auto* tr = add_command(app, "train", "Train a model and write model.spck and metrics.csv", o);
  add_labelling_flags(tr, o);
  add_feature_flags(tr, o);
  tr->add_option("--arch", o.arch, "lstm or transformer")->capture_default_str();
  tr->add_option("--seed", o.seed)->capture_default_str();
  tr->add_option("--epochs", o.epochs, "0 selects 20 (lstm) or 50 (transformer)")->capture_default_str();
  tr->add_option("--iterations", o.iterations, "Steps per epoch")->capture_default_str();
  tr->add_option("--batch-size", o.batch_size)->capture_default_str();
  tr->add_option("--lr", o.learning_rate)->capture_default_str();
  tr->add_option("--teacher-forcing", o.teacher_forcing, "Probability of ground-truth context")->capture_default_str();
  tr->add_option("--patience", o.patience)->capture_default_str();
  tr->add_option("--lr-decay", o.lr_decay)->capture_default_str();
  tr->add_option("--lr-decay-every", o.lr_decay_every)->capture_default_str();
  tr->add_option("--hidden", o.hidden)->capture_default_str();
  tr->add_option("--heads", o.heads)->capture_default_str();
  tr->add_option("--layers", o.layers)->capture_default_str();
  tr->add_option("--context-layers", o.context_layers)->capture_default_str();
  tr->add_option("--ff-dim", o.ff_dim)->capture_default_str();
  tr->add_option("--dropout", o.dropout)->capture_default_str();

  auto* ev = add_command(app, "eval", "Score a checkpoint at segment or sequence level", o);
  add_labelling_flags(ev, o);
  add_feature_flags(ev, o);
  ev->add_option("--ckpt", o.ckpt, "Checkpoint file");
  ev->add_option("--level", o.level, "segment or sequence")->capture_default_str();
  ev->add_option("--split", o.split, "train, val or test")->capture_default_str();

  auto* sw = add_command(app, "sweep", "Agreement grid of the labelling rule over n and lambda", o);
  sw->add_option("--n", o.ns, "History lengths, e.g. 0..5 or 2,3")->capture_default_str();
  sw->add_option("--lambda", o.lambdas, "Comma-separated decay rates")->delimiter(',')->capture_default_str();
  sw->add_option("--tau", o.tau)->capture_default_str();
  sw->add_option("--tolerance", o.tolerance, "Alignment tolerance in windows")->capture_default_str();

  auto* ab = add_command(app, "ablate", "Evaluate checkpoints over feature sources and history lengths", o);
  ab->add_option("--ckpt", o.ckpts, "Comma-separated checkpoints")->delimiter(',');
  ab->add_option("--feature-list", o.feature_list, "One feature source per checkpoint (default: --features)")
      ->delimiter(',');
  ab->add_option("--features", o.features)->capture_default_str();
  ab->add_option("--n", o.ns, "History lengths, e.g. 2,3,4")->capture_default_str();
  ab->add_option("--lambda", o.lambda)->capture_default_str();
  ab->add_option("--tau", o.tau)->capture_default_str();
  ab->add_option("--level", o.level)->capture_default_str();
  ab->add_option("--split", o.split)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    err << app.help();
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    if (!o.config.empty()) apply_config_file(sub, o.config);
    const fs::path dir = run_dir(o, name);
    write_text(dir / "resolved_config.txt", sub->config_to_str(true, false));
    std::string summary;
    if (name == "segment") summary = cmd_segment(o, dir);
    if (name == "augment") summary = cmd_augment(o, dir);
    if (name == "label") summary = cmd_label(o, dir);
    if (name == "extract") summary = cmd_extract(o, dir);
    if (name == "train") summary = cmd_train(o, dir, err);
    if (name == "eval") summary = cmd_eval(o, dir);
    if (name == "sweep") summary = cmd_sweep(o, dir);
    if (name == "ablate") summary = cmd_ablate(o, dir);
    write_text(dir / "summary.txt", summary);
    out << summary << "outputs: " << dir.string() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << sub->help();
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n' << sub->help();
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericDivergence& e) {
    err << "numeric divergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace stressprog

#include "stressprog/pipeline.hpp"

#include <stdexcept>

#include "stressprog/checkpoint.hpp"
#include "stressprog/errors.hpp"
#include "stressprog/wav.hpp"

namespace stressprog {

FeatureSource FeatureSource::parse(const std::string& spec) {
  FeatureSource s;
  if (spec == "mfcc") return s;
  if (spec.rfind("file:", 0) == 0 && spec.size() > 5) {
    s.kind = Kind::File;
    s.dir = spec.substr(5);
    return s;
  }
  throw std::invalid_argument("feature source must be 'mfcc' or 'file:<dir>', got '" + spec + "'");
}

std::string FeatureSource::describe() const { return kind == Kind::Mfcc ? "mfcc" : "file:" + dir.string(); }

namespace {

std::filesystem::path feature_path(const FeatureSource& source, const ManifestRecord& record) {
  return source.dir / (record.utterance_id + ".fseq");
}

std::vector<SegmentWindow> windows_for_count(std::size_t count, const ManifestRecord& record,
                                             const WindowSpec& spec) {
  std::vector<SegmentWindow> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    out[k].index = k;
    out[k].start_s = static_cast<double>(k) * spec.hop_s;
    out[k].end_s = out[k].start_s + spec.window_s;
    out[k].clip_ref = record.utterance_id;
  }
  return out;
}

std::vector<SegmentWindow> audio_windows(const ManifestRecord& record, const WindowSpec& spec) {
  const auto path = record.resolved_audio_path();
  if (!std::filesystem::exists(path)) throw DataError("missing audio file: " + path.string());
  const std::size_t samples = wav_sample_count(path);
  if (window_count(samples, kSampleRate, spec) == 0) {
    throw DataError(path.string() + ": shorter than one " + std::to_string(spec.window_s) + " s window");
  }
  return segment(samples, kSampleRate, record.utterance_id, spec);
}

}  // namespace

std::vector<SegmentWindow> record_windows(const ManifestRecord& record, const WindowSpec& spec) {
  return align_labels(audio_windows(record, spec), record.spans);
}

Eigen::MatrixXd record_features(const ManifestRecord& record, const FeatureSource& source,
                                const MfccExtractor* extractor) {
  if (source.kind == FeatureSource::Kind::File) {
    const auto path = feature_path(source, record);
    if (!std::filesystem::exists(path)) throw DataError("missing feature file: " + path.string());
    return load_embeddings(path, 0).vectors;
  }
  std::optional<MfccExtractor> local;
  if (extractor == nullptr) extractor = &local.emplace(source.mfcc);
  const auto path = record.resolved_audio_path();
  if (!std::filesystem::exists(path)) throw DataError("missing audio file: " + path.string());
  const PcmAudio audio = read_wav(path);
  const auto windows = segment(audio.samples.size(), audio.sample_rate, record.utterance_id);
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(windows.size()), extractor->config().output_dim());
  const std::size_t len = extractor->config().window_samples();
  for (std::size_t k = 0; k < windows.size(); ++k) {
    std::span<const float> slice(audio.samples.data() + windows[k].start_sample(), len);
    rows.row(static_cast<Eigen::Index>(k)) = extractor->window_vector(slice).transpose();
  }
  return rows;
}

std::vector<std::optional<VadCode>> relabel_windows(const std::vector<SegmentWindow>& windows,
                                                    const LabellingConfig& labelling) {
  std::vector<std::optional<VadCode>> out(windows.size());
  std::size_t t = 0;
  while (t < windows.size()) {
    if (!windows[t].label) {
      ++t;
      continue;
    }
    std::vector<VadCode> run;
    const std::size_t first = t;
    while (t < windows.size() && windows[t].label) run.push_back(*windows[t++].label);
    const auto codes = relabel_sequence(run, labelling);
    for (std::size_t k = 0; k < codes.size(); ++k) out[first + k] = codes[k];
  }
  return out;
}

const std::vector<LabelledSequence>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split '" + name + "'");
}

Dataset build_dataset(const std::vector<ManifestRecord>& records, const FeatureSource& source,
                      const LabellingConfig& labelling) {
  labelling.validate();
  Dataset data;
  std::optional<MfccExtractor> extractor;
  if (source.kind == FeatureSource::Kind::Mfcc) extractor.emplace(source.mfcc);
  for (const auto& record : records) {
    const Eigen::MatrixXd rows = record_features(record, source, extractor ? &*extractor : nullptr);
    std::vector<SegmentWindow> windows;
    if (source.kind == FeatureSource::Kind::File) {
      windows = align_labels(windows_for_count(static_cast<std::size_t>(rows.rows()), record, {}), record.spans);
    } else {
      windows = record_windows(record);
    }
    if (static_cast<Eigen::Index>(windows.size()) != rows.rows()) {
      throw DataError("feature rows (" + std::to_string(rows.rows()) + ") do not match the " +
                      std::to_string(windows.size()) + " windows of '" + record.utterance_id + "'");
    }
    if (data.dim == 0) data.dim = static_cast<int>(rows.cols());
    if (rows.cols() != data.dim) throw DataError("inconsistent feature dimension in '" + record.utterance_id + "'");

    auto& bucket = record.split == "train" ? data.train : (record.split == "val" ? data.val : data.test);
    std::size_t stress_votes = 0, labelled = 0;
    std::size_t t = 0;
    while (t < windows.size()) {
      if (!windows[t].label) {
        ++t;
        continue;
      }
      std::size_t end = t;
      std::vector<VadCode> emotions;
      while (end < windows.size() && windows[end].label) emotions.push_back(*windows[end++].label);
      LabelledSequence seq;
      seq.recording_id = record.utterance_id;
      seq.targets = relabel_sequence(emotions, labelling);
      seq.features = rows.middleRows(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(end - t)).transpose();
      for (std::size_t k = t; k < end; ++k) seq.window_index.push_back(k);
      for (const auto& code : seq.targets) stress_votes += is_stress(code) ? 1 : 0;
      labelled += seq.size();
      bucket.push_back(std::move(seq));
      t = end;
    }
    if (record.stress) {
      data.recording_truth[record.utterance_id] = *record.stress;
    } else if (labelled > 0) {
      data.recording_truth[record.utterance_id] = 2 * stress_votes >= labelled;
    }
  }
  return data;
}

std::vector<SweepSequence> sweep_sequences(const std::vector<ManifestRecord>& records) {
  std::vector<SweepSequence> out;
  for (const auto& record : records) {
    if (record.stress_spans.empty()) continue;
    const auto windows = record_windows(record);
    const auto reference = align_labels(windows, record.stress_spans);
    SweepSequence s;
    for (std::size_t k = 0; k < windows.size(); ++k) {
      s.emotions.push_back(windows[k].label);
      s.reference.push_back(reference[k].label);
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) throw DataError("no manifest record carries stress_spans to compare against");
  return out;
}

EvalLevel parse_eval_level(const std::string& name) {
  if (name == "segment") return EvalLevel::Segment;
  if (name == "sequence") return EvalLevel::Sequence;
  throw std::invalid_argument("evaluation level must be 'segment' or 'sequence'");
}

EvalReport evaluate(const ModelParams& params, const std::vector<LabelledSequence>& data,
                    const std::map<std::string, bool>& recording_truth, int history, EvalLevel level) {
  if (data.empty()) throw DataError("evaluation split has no labelled windows");
  if (level == EvalLevel::Segment) return evaluate_segments(params, data, history);
  std::map<std::string, std::vector<bool>> votes;
  std::map<std::string, bool> truth;
  for (const auto& seq : data) {
    auto& v = votes[seq.recording_id];
    for (const auto& p : infer_sequence(params, seq, history)) v.push_back(p.stress);
    const auto it = recording_truth.find(seq.recording_id);
    if (it == recording_truth.end()) throw DataError("no recording-level truth for '" + seq.recording_id + "'");
    truth[seq.recording_id] = it->second;
  }
  return score_sequence_level(votes, truth);
}

std::vector<AblationCell> ablation_grid(const std::vector<ManifestRecord>& records, const AblationSpec& spec) {
  if (spec.checkpoints.size() != spec.features.size()) {
    throw std::invalid_argument("ablation needs one feature source per checkpoint");
  }
  if (spec.checkpoints.empty() || spec.ns.empty()) throw std::invalid_argument("empty ablation grid");
  std::vector<AblationCell> cells;
  for (std::size_t c = 0; c < spec.checkpoints.size(); ++c) {
    if (!std::filesystem::exists(spec.checkpoints[c])) {
      throw DataError("missing checkpoint: " + spec.checkpoints[c].string());
    }
    const ModelParams params = load_checkpoint(spec.checkpoints[c]);
    const FeatureSource source = FeatureSource::parse(spec.features[c]);
    for (int n : spec.ns) {
      const Dataset data = build_dataset(records, source, LabellingConfig{n, spec.lambda, spec.tau});
      if (data.dim != params.shape.input_dim) {
        throw DataError("checkpoint " + spec.checkpoints[c].string() + " expects d=" +
                        std::to_string(params.shape.input_dim) + " but features have d=" + std::to_string(data.dim));
      }
      AblationCell cell;
      cell.model = spec.checkpoints[c].string();
      cell.features = source.describe();
      cell.n = n;
      cell.report = evaluate(params, data.split(spec.split), data.recording_truth, n, spec.level);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

}  // namespace stressprog

#include "stressprog/manifest.hpp"

#include <fstream>
#include <json.hpp>

#include "stressprog/errors.hpp"

namespace stressprog {
namespace {

using nlohmann::json;

std::vector<LabelSpan> parse_spans(const json& array) {
  std::vector<LabelSpan> spans;
  for (const auto& item : array) {
    LabelSpan span;
    span.start_s = item.at("start_s").get<double>();
    span.end_s = item.at("end_s").get<double>();
    span.label = parse_label(item.at("label").get<std::string>());
    spans.push_back(span);
  }
  check_spans(spans);
  return spans;
}

json spans_to_json(const std::vector<LabelSpan>& spans) {
  json array = json::array();
  for (const auto& s : spans) {
    array.push_back({{"start_s", s.start_s}, {"end_s", s.end_s}, {"label", s.label.to_string()}});
  }
  return array;
}

}  // namespace

std::filesystem::path ManifestRecord::resolved_audio_path() const {
  std::filesystem::path p(audio_path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  std::vector<ManifestRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      ManifestRecord r;
      r.audio_path = j.value("audio_path", "");
      r.speaker_id = j.value("speaker_id", "");
      r.utterance_id = j.at("utterance_id").get<std::string>();
      r.text_id = j.value("text_id", "");
      r.split = j.value("split", "train");
      if (r.split != "train" && r.split != "val" && r.split != "test") {
        throw DataError("split must be train, val or test");
      }
      if (j.contains("spans")) r.spans = parse_spans(j.at("spans"));
      if (j.contains("stress_spans")) r.stress_spans = parse_spans(j.at("stress_spans"));
      if (j.contains("stress")) r.stress = j.at("stress").get<bool>();
      r.base_dir = path.parent_path();
      records.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

std::string to_json_line(const ManifestRecord& r) {
  json j = {{"audio_path", r.audio_path}, {"speaker_id", r.speaker_id},
            {"utterance_id", r.utterance_id}, {"text_id", r.text_id},
            {"spans", spans_to_json(r.spans)}, {"split", r.split}};
  if (r.stress) j["stress"] = *r.stress;
  if (!r.stress_spans.empty()) j["stress_spans"] = spans_to_json(r.stress_spans);
  return j.dump();
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

}  // namespace stressprog

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stressprog/segmentation.hpp"

namespace stressprog {

// One JSON-lines manifest record:
//   {"audio_path", "speaker_id", "utterance_id", "text_id",
//    "spans": [{"start_s", "end_s", "label": "v,a,d" | emotion name}],
//    "split": "train" | "val" | "test"}
// Optional extras: "stress" (recording-level ground truth, bool) and
// "stress_spans" (reference stress annotation, same shape as "spans").
struct ManifestRecord {
  std::string audio_path;  // as written in the manifest
  std::string speaker_id;
  std::string utterance_id;
  std::string text_id;
  std::vector<LabelSpan> spans;
  std::string split = "train";
  std::optional<bool> stress;
  std::vector<LabelSpan> stress_spans;

  std::filesystem::path base_dir;  // directory of the manifest file

  std::filesystem::path resolved_audio_path() const;
};

// Throws DataError with the offending line number on malformed records.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

std::string to_json_line(const ManifestRecord& record);

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

}  // namespace stressprog

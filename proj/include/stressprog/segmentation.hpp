#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stressprog/vad.hpp"
#include "stressprog/wav.hpp"

namespace stressprog {

struct AudioClip {
  std::vector<float> samples;
  int sample_rate = kSampleRate;
  std::string speaker_id;
  std::string utterance_id;
  std::string text_id;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Half-open annotation interval [start_s, end_s).
struct LabelSpan {
  double start_s = 0.0;
  double end_s = 0.0;
  VadCode label;
};

struct SegmentWindow {
  std::size_t index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string clip_ref;
  std::optional<VadCode> label;

  std::size_t start_sample(int rate = kSampleRate) const;
};

struct WindowSpec {
  double window_s = 10.0;
  double hop_s = 5.0;
};

// floor((samples - window) / hop) + 1 for clips at least one window long, else 0.
std::size_t window_count(std::size_t num_samples, int sample_rate, const WindowSpec& spec = {});

// Windows over a clip of `num_samples`; trailing audio shorter than a window
// is dropped. Throws std::invalid_argument when the clip is shorter than one
// window.
std::vector<SegmentWindow> segment(std::size_t num_samples, int sample_rate,
                                   const std::string& clip_ref, const WindowSpec& spec = {});

std::vector<SegmentWindow> segment(const AudioClip& clip, const WindowSpec& spec = {});

// Validates that spans are sorted and non-overlapping (std::invalid_argument).
void check_spans(std::span<const LabelSpan> spans);

// Each window takes the label of the span containing its midpoint; windows
// with no covering span are left unlabelled.
std::vector<SegmentWindow> align_labels(std::vector<SegmentWindow> windows,
                                        std::span<const LabelSpan> spans);

struct AugmentedClip {
  AudioClip clip;
  VadCode label;                 // code of the final emotional state
  std::vector<LabelSpan> spans;  // one per input clip, in order
};

// Concatenates same-speaker, same-text clips in order with `gap_s` seconds of
// silence between them.
AugmentedClip concat_augment(std::span<const AudioClip> clips, std::span<const Emotion> emotions,
                             double gap_s = 0.0);

// Same, with arbitrary per-clip codes (e.g. from manifest labels).
AugmentedClip concat_augment(std::span<const AudioClip> clips, std::span<const VadCode> codes,
                             double gap_s = 0.0);

}  // namespace stressprog

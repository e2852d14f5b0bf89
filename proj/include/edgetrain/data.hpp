// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace edgetrain {

/// Labelled samples of shape [channels, length], kept in recording order.
struct Dataset {
  std::int64_t channels = 0;
  std::int64_t length = 0;
  std::int64_t classes = 0;
  /// Row-major [channels, length] per sample.
  std::vector<std::vector<float>> samples;
  std::vector<std::int64_t> labels;
  /// Session index per sample.
  std::vector<std::int64_t> sessions;

  std::size_t size() const { return samples.size(); }
  /// Samples of one session, order preserved.
  Dataset session(std::int64_t s) const;
  /// Session indices present, ascending.
  std::vector<std::int64_t> session_ids() const;
  /// First `fraction` of the samples (temporal order) and the rest.
  std::pair<Dataset, Dataset> temporal_split(double fraction) const;
  /// Throws FormatError on shape mismatches or labels outside [0, classes).
  void validate() const;
};

/// Class templates plus white noise, with a per-session drift applied in
/// channel space: session s adds s * offset and rotates channel pairs
/// (0,1), (2,3), ... by s * rotation radians.
struct SyntheticSpec {
  std::int64_t classes = 2;
  std::int64_t channels = 8;
  std::int64_t length = 1900;
  std::int64_t samples_per_session = 200;
  std::int64_t sessions = 1;
  /// Standard deviation of the class templates.
  double separation = 1.0;
  double noise = 1.0;
  double drift_offset = 0.0;
  double drift_rotation = 0.0;
  std::uint64_t seed = 0;
};

/// Templates are smooth: a few random low-frequency sinusoids per class and
/// channel with Gaussian amplitudes, plus a Gaussian per-channel mean.
/// Labels alternate in a seeded random order with balanced classes.
Dataset make_synthetic(const SyntheticSpec& spec);

struct EogChannels {
  std::vector<float> horizontal;
  std::vector<float> vertical;
};

/// V_H = V_R - V_L and V_V = V_C - (V_R + V_L) / 2, elementwise.
EogChannels derive_eog_channels(const std::vector<float>& left, const std::vector<float>& right,
                                const std::vector<float>& center);

/// Column layout of a CSV recording. `channels` names the input channels in
/// order; with `eog` set, the three named electrode channels (left, right,
/// center) are replaced by the derived horizontal and vertical channels.
struct CsvLayout {
  std::vector<std::string> channels;
  bool eog = false;
  std::string label_column = "label";
  std::string session_column = "session";

  /// "a,b,c" lists channels; "eog:L,R,C" derives two EOG channels from the
  /// named electrodes; the empty string keeps every channel in header order.
  static CsvLayout parse(std::string_view text);
};

/// One row per sample. The header names a label column, an optional session
/// column (default 0), and one column per (channel, time) pair named
/// "<channel>:<t>" for t = 0 .. length-1. Throws IoError when the file
/// cannot be read and FormatError on ragged rows, non-numeric cells,
/// missing columns or negative labels.
Dataset ingest_csv(const std::string& path, const CsvLayout& layout);
Dataset parse_csv(std::string_view text, const CsvLayout& layout);

/// Inverse of parse_csv with every channel kept.
std::string dataset_to_csv(const Dataset& d, const std::vector<std::string>& channel_names);

}  // namespace edgetrain

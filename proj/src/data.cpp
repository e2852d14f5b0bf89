// Copyright 2026 The EdgeTrain Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgetrain/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "edgetrain/error.hpp"

namespace edgetrain {
namespace {

constexpr const char* kOrigin = "data";

Dataset empty_like(const Dataset& d) {
  Dataset out;
  out.channels = d.channels;
  out.length = d.length;
  out.classes = d.classes;
  return out;
}

void push(Dataset& d, const Dataset& from, std::size_t i) {
  d.samples.push_back(from.samples[i]);
  d.labels.push_back(from.labels[i]);
  d.sessions.push_back(from.sessions[i]);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double number(std::string_view cell, std::size_t row, std::string_view column) {
  cell = trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
    throw FormatError(kOrigin, "row " + std::to_string(row) + ", column '" + std::string(column) +
                                   "': non-numeric cell '" + std::string(cell) + "'");
  return v;
}

}  // namespace

Dataset Dataset::session(std::int64_t s) const {
  Dataset out = empty_like(*this);
  for (std::size_t i = 0; i < size(); ++i)
    if (sessions[i] == s) push(out, *this, i);
  return out;
}

std::vector<std::int64_t> Dataset::session_ids() const {
  const std::set<std::int64_t> ids(sessions.begin(), sessions.end());
  return {ids.begin(), ids.end()};
}

std::pair<Dataset, Dataset> Dataset::temporal_split(double fraction) const {
  const auto cut = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(size())));
  std::pair<Dataset, Dataset> out{empty_like(*this), empty_like(*this)};
  for (std::size_t i = 0; i < size(); ++i) push(i < cut ? out.first : out.second, *this, i);
  return out;
}

void Dataset::validate() const {
  if (labels.size() != samples.size() || sessions.size() != samples.size())
    throw FormatError(kOrigin, "labels, sessions and samples differ in count");
  for (std::size_t i = 0; i < size(); ++i) {
    if (static_cast<std::int64_t>(samples[i].size()) != channels * length)
      throw FormatError(kOrigin, "sample " + std::to_string(i) + " has " + std::to_string(samples[i].size()) +
                                     " values, expected " + std::to_string(channels * length));
    if (labels[i] < 0 || labels[i] >= classes)
      throw FormatError(kOrigin, "sample " + std::to_string(i) + ": label " + std::to_string(labels[i]) +
                                     " out of range [0, " + std::to_string(classes) + ")");
  }
}

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2 || spec.channels < 1 || spec.length < 1 || spec.samples_per_session < 1 || spec.sessions < 1)
    throw FormatError(kOrigin, "synthetic data needs at least 2 classes and positive sizes");
  const auto C = static_cast<std::size_t>(spec.channels);
  const auto T = static_cast<std::size_t>(spec.length);

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> freq(0.5, 4.0), phase(0.0, 2.0 * std::numbers::pi);
  std::vector<std::vector<double>> templates(static_cast<std::size_t>(spec.classes), std::vector<double>(C * T));
  for (auto& tpl : templates)
    for (std::size_t c = 0; c < C; ++c) {
      const double mean = spec.separation * gauss(rng);
      double f[3], p[3], a[3];
      for (int j = 0; j < 3; ++j) {
        f[j] = freq(rng);
        p[j] = phase(rng);
        a[j] = spec.separation * gauss(rng) * std::sqrt(2.0 / 3.0);
      }
      for (std::size_t t = 0; t < T; ++t) {
        double v = mean;
        for (int j = 0; j < 3; ++j)
          v += a[j] * std::sin(2.0 * std::numbers::pi * f[j] * static_cast<double>(t) / static_cast<double>(T) + p[j]);
        tpl[c * T + t] = v;
      }
    }
  std::vector<double> offset(C);
  for (auto& o : offset) o = gauss(rng);

  Dataset d;
  d.channels = spec.channels;
  d.length = spec.length;
  d.classes = spec.classes;
  std::vector<double> clean(C * T);
  for (std::int64_t s = 0; s < spec.sessions; ++s) {
    std::seed_seq seq{spec.seed, static_cast<std::uint64_t>(s) + 1};
    std::mt19937_64 srng(seq);
    std::vector<std::int64_t> labels(static_cast<std::size_t>(spec.samples_per_session));
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::int64_t>(i) % spec.classes;
    std::shuffle(labels.begin(), labels.end(), srng);
    const double angle = spec.drift_rotation * static_cast<double>(s);
    const double cs = std::cos(angle), sn = std::sin(angle);
    for (const std::int64_t label : labels) {
      const auto& tpl = templates[static_cast<std::size_t>(label)];
      for (std::size_t i = 0; i < C * T; ++i) clean[i] = tpl[i] + spec.noise * gauss(srng);
      std::vector<float> x(C * T);
      for (std::size_t c = 0; c < C; ++c) {
        const bool paired = (c ^ 1) < C;
        const std::size_t other = c ^ 1;
        const double sign = (c & 1) ? 1.0 : -1.0;
        for (std::size_t t = 0; t < T; ++t) {
          double v = clean[c * T + t];
          if (paired) v = cs * v + sign * sn * clean[other * T + t];
          v += spec.drift_offset * static_cast<double>(s) * offset[c];
          x[c * T + t] = static_cast<float>(v);
        }
      }
      d.samples.push_back(std::move(x));
      d.labels.push_back(label);
      d.sessions.push_back(s);
    }
  }
  return d;
}

EogChannels derive_eog_channels(const std::vector<float>& left, const std::vector<float>& right,
                                const std::vector<float>& center) {
  if (left.size() != right.size() || left.size() != center.size())
    throw FormatError(kOrigin, "EOG electrode channels differ in length");
  EogChannels out{std::vector<float>(left.size()), std::vector<float>(left.size())};
  for (std::size_t i = 0; i < left.size(); ++i) {
    out.horizontal[i] = right[i] - left[i];
    out.vertical[i] = center[i] - (right[i] + left[i]) / 2.0f;
  }
  return out;
}

CsvLayout CsvLayout::parse(std::string_view text) {
  CsvLayout layout;
  text = trim(text);
  if (text.empty()) return layout;
  if (text.substr(0, 4) == "eog:") {
    layout.eog = true;
    text.remove_prefix(4);
  }
  for (const auto name : split(text, ',')) {
    if (trim(name).empty()) throw FormatError(kOrigin, "empty channel name in layout");
    layout.channels.emplace_back(trim(name));
  }
  if (layout.eog && layout.channels.size() != 3)
    throw FormatError(kOrigin, "eog layout names exactly three electrodes: left, right, center");
  return layout;
}

Dataset parse_csv(std::string_view text, const CsvLayout& layout) {
  std::vector<std::string_view> lines;
  for (const auto line : split(text, '\n'))
    if (!trim(line).empty()) lines.push_back(line);
  if (lines.empty()) throw FormatError(kOrigin, "empty CSV");

  const auto header = split(lines[0], ',');
  std::map<std::string, std::size_t> column;
  std::vector<std::string> channel_order;
  std::map<std::string, std::vector<std::pair<std::int64_t, std::size_t>>> cells;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name(trim(header[i]));
    column[name] = i;
    const std::size_t colon = name.rfind(':');
    if (colon == std::string::npos) continue;
    const std::string ch = name.substr(0, colon);
    const double t = number(std::string_view(name).substr(colon + 1), 0, name);
    if (!cells.count(ch)) channel_order.push_back(ch);
    cells[ch].emplace_back(static_cast<std::int64_t>(t), i);
  }
  if (!column.count(layout.label_column)) throw FormatError(kOrigin, "missing column '" + layout.label_column + "'");
  const std::vector<std::string> wanted = layout.channels.empty() ? channel_order : layout.channels;
  if (wanted.empty()) throw FormatError(kOrigin, "no '<channel>:<t>' columns in header");

  std::int64_t length = -1;
  std::vector<std::vector<std::size_t>> index;
  for (const auto& ch : wanted) {
    auto it = cells.find(ch);
    if (it == cells.end()) throw FormatError(kOrigin, "missing channel '" + ch + "'");
    auto cols = it->second;
    std::sort(cols.begin(), cols.end());
    for (std::size_t t = 0; t < cols.size(); ++t)
      if (cols[t].first != static_cast<std::int64_t>(t))
        throw FormatError(kOrigin, "channel '" + ch + "' does not cover times 0.." + std::to_string(cols.size() - 1));
    if (length >= 0 && length != static_cast<std::int64_t>(cols.size()))
      throw FormatError(kOrigin, "channel '" + ch + "' has a different length");
    length = static_cast<std::int64_t>(cols.size());
    std::vector<std::size_t> idx;
    for (const auto& c : cols) idx.push_back(c.second);
    index.push_back(std::move(idx));
  }

  Dataset d;
  d.channels = layout.eog ? 2 : static_cast<std::int64_t>(wanted.size());
  d.length = length;
  const auto session_col = column.find(layout.session_column);
  const auto T = static_cast<std::size_t>(length);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto row = split(lines[r], ',');
    if (row.size() != header.size())
      throw FormatError(kOrigin, "row " + std::to_string(r) + " has " + std::to_string(row.size()) + " cells, header has " +
                                     std::to_string(header.size()));
    const double label = number(row[column.at(layout.label_column)], r, layout.label_column);
    if (label < 0 || label != std::floor(label))
      throw FormatError(kOrigin, "row " + std::to_string(r) + ": label must be a nonnegative integer");
    const double session = session_col == column.end() ? 0.0 : number(row[session_col->second], r, layout.session_column);
    std::vector<std::vector<float>> ch(wanted.size(), std::vector<float>(T));
    for (std::size_t c = 0; c < wanted.size(); ++c)
      for (std::size_t t = 0; t < T; ++t) ch[c][t] = static_cast<float>(number(row[index[c][t]], r, wanted[c]));
    std::vector<float> x;
    if (layout.eog) {
      const EogChannels e = derive_eog_channels(ch[0], ch[1], ch[2]);
      x = e.horizontal;
      x.insert(x.end(), e.vertical.begin(), e.vertical.end());
    } else {
      for (const auto& v : ch) x.insert(x.end(), v.begin(), v.end());
    }
    d.samples.push_back(std::move(x));
    d.labels.push_back(static_cast<std::int64_t>(label));
    d.sessions.push_back(static_cast<std::int64_t>(session));
    d.classes = std::max(d.classes, static_cast<std::int64_t>(label) + 1);
  }
  if (d.samples.empty()) throw FormatError(kOrigin, "CSV has a header but no samples");
  return d;
}

Dataset ingest_csv(const std::string& path, const CsvLayout& layout) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(kOrigin, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(kOrigin, "error reading '" + path + "'");
  return parse_csv(ss.str(), layout);
}

std::string dataset_to_csv(const Dataset& d, const std::vector<std::string>& channel_names) {
  if (static_cast<std::int64_t>(channel_names.size()) != d.channels)
    throw FormatError(kOrigin, "need one name per channel");
  std::ostringstream os;
  os.precision(9);
  os << "label,session";
  for (const auto& ch : channel_names)
    for (std::int64_t t = 0; t < d.length; ++t) os << ',' << ch << ':' << t;
  os << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    os << d.labels[i] << ',' << d.sessions[i];
    for (const float v : d.samples[i]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

}  // namespace edgetrain

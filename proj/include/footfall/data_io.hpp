#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "footfall/error.hpp"

namespace footfall {

struct RawSample {
  std::int64_t timestamp_ms = 0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const RawSample&, const RawSample&) = default;
};

struct AnnotationEvent {
  std::int64_t timestamp_ms = 0;

  friend bool operator==(const AnnotationEvent&, const AnnotationEvent&) = default;
};

struct RawSession {
  std::vector<RawSample> samples;
  std::vector<AnnotationEvent> events;
  std::string source_name;
  // Rows whose eventType was neither "sample" nor "footfall".
  std::size_t skipped_rows = 0;
};

inline bool same_content(const RawSession& a, const RawSession& b) {
  return a.samples == b.samples && a.events == b.events;
}

struct LabeledSeries {
  std::vector<RawSample> samples;
  std::vector<std::uint8_t> target;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

// Splits on runs of ',' or '\t' (a run counts as one delimiter).
inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ',' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ',' && line[j] != '\t') ++j;
    out.push_back(trim(line.substr(i, j - i)));
    i = j;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_timestamp(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec == std::errc{} && ptr == s.data() + s.size()) return true;
  double d = 0.0;
  if (!parse_double(s, d)) return false;
  out = std::llround(d);
  return true;
}

inline void append_number(std::string& out, double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

inline void append_number(std::string& out, std::int64_t v) {
  std::array<char, 24> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

}  // namespace detail

inline constexpr std::string_view kSessionHeader = "timestamp,x,y,z,eventType";

// Parses a session CSV. Header columns may appear in any order; comma and tab
// are both accepted as delimiters.
inline RawSession parse_session(std::string_view text, std::string source_name = {}) {
  RawSession session;
  session.source_name = std::move(source_name);

  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) {
    while (pos < text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (!detail::trim(line).empty()) return true;
    }
    return false;
  };

  std::string_view line;
  if (!next_line(line)) throw FormatError("empty input: missing header row");

  constexpr std::array<std::string_view, 5> kColumns = {"timestamp", "x", "y", "z", "eventType"};
  std::array<std::size_t, 5> col{};
  const auto header = detail::split_fields(line);
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), kColumns[c]);
    if (it == header.end()) throw FormatError("missing required column '" + std::string(kColumns[c]) + "'");
    col[c] = static_cast<std::size_t>(it - header.begin());
  }

  while (next_line(line)) {
    const auto fields = detail::split_fields(line);
    if (fields.size() < header.size())
      throw RowError(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
    const std::string_view type = fields[col[4]];
    std::int64_t ts = 0;
    if (type == "sample") {
      RawSample s;
      if (!detail::parse_timestamp(fields[col[0]], ts)) throw RowError(line_no, "non-numeric timestamp");
      s.timestamp_ms = ts;
      if (!detail::parse_double(fields[col[1]], s.x)) throw RowError(line_no, "non-numeric x");
      if (!detail::parse_double(fields[col[2]], s.y)) throw RowError(line_no, "non-numeric y");
      if (!detail::parse_double(fields[col[3]], s.z)) throw RowError(line_no, "non-numeric z");
      if (!session.samples.empty() && s.timestamp_ms < session.samples.back().timestamp_ms)
        throw RowError(line_no, "sample timestamps must be non-decreasing");
      session.samples.push_back(s);
    } else if (type == "footfall") {
      if (!detail::parse_timestamp(fields[col[0]], ts)) throw RowError(line_no, "non-numeric timestamp");
      session.events.push_back({ts});
    } else {
      ++session.skipped_rows;
    }
  }

  if (session.samples.empty()) throw FormatError("no samples");
  std::stable_sort(session.events.begin(), session.events.end(),
                   [](const auto& a, const auto& b) { return a.timestamp_ms < b.timestamp_ms; });
  return session;
}

inline RawSession load_session(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open session file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_session(buf.str(), path.filename().string());
}

inline void append_sample_row(std::string& out, const RawSample& s) {
  detail::append_number(out, s.timestamp_ms);
  out += ',';
  detail::append_number(out, s.x);
  out += ',';
  detail::append_number(out, s.y);
  out += ',';
  detail::append_number(out, s.z);
  out += ",sample\n";
}

// Annotation rows carry zeros in the accelerometer columns.
inline void append_event_row(std::string& out, const AnnotationEvent& e) {
  detail::append_number(out, e.timestamp_ms);
  out += ",0,0,0,footfall\n";
}

// Serializes rows in timestamp order; a sample sorts before an annotation with
// the same timestamp.
inline std::string write_session(const RawSession& session) {
  std::string out;
  out.reserve(48 * (session.samples.size() + session.events.size()) + 32);
  out += kSessionHeader;
  out += '\n';
  std::size_t e = 0;
  for (const auto& s : session.samples) {
    while (e < session.events.size() && session.events[e].timestamp_ms < s.timestamp_ms)
      append_event_row(out, session.events[e++]);
    append_sample_row(out, s);
  }
  while (e < session.events.size()) append_event_row(out, session.events[e++]);
  return out;
}

inline void save_session(const RawSession& session, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write session file: " + path.string());
  const std::string text = write_session(session);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Index of the sample nearest to `t`; equidistant ties go to the lower index.
// `samples` must be sorted by timestamp.
inline std::size_t nearest_sample_index(const std::vector<RawSample>& samples, std::int64_t t) {
  auto it = std::lower_bound(samples.begin(), samples.end(), t,
                             [](const RawSample& s, std::int64_t v) { return s.timestamp_ms < v; });
  if (it == samples.end()) {
    // Walk back to the first sample sharing the last timestamp.
    auto idx = samples.size() - 1;
    while (idx > 0 && samples[idx - 1].timestamp_ms == samples[idx].timestamp_ms) --idx;
    return idx;
  }
  std::size_t hi = static_cast<std::size_t>(it - samples.begin());
  if (hi == 0) return 0;
  std::size_t lo = hi - 1;
  while (lo > 0 && samples[lo - 1].timestamp_ms == samples[lo].timestamp_ms) --lo;
  const auto d_lo = t - samples[lo].timestamp_ms;
  const auto d_hi = samples[hi].timestamp_ms - t;
  return d_hi < d_lo ? hi : lo;
}

inline LabeledSeries assign_labels(const RawSession& session) {
  if (session.samples.empty()) throw ValidationError("assign_labels: session has no samples");
  LabeledSeries out;
  out.samples = session.samples;
  out.target.assign(out.samples.size(), 0);
  for (const auto& e : session.events) out.target[nearest_sample_index(out.samples, e.timestamp_ms)] = 1;
  return out;
}

// Sample indices of the annotations, deduplicated and sorted.
inline std::vector<std::size_t> event_indices(const LabeledSeries& series) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < series.target.size(); ++i)
    if (series.target[i]) out.push_back(i);
  return out;
}

}  // namespace footfall

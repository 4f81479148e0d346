#include "nilm/series_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "nilm/error.hpp"

namespace nilm {

std::string_view to_string(SensorKind k) {
  switch (k) {
    case SensorKind::aggregate_30A: return "aggregate_30A";
    case SensorKind::aggregate_100A: return "aggregate_100A";
    case SensorKind::aggregate: return "aggregate";
    case SensorKind::iam_1s: return "iam_1s";
    case SensorKind::iam_5s: return "iam_5s";
  }
  return "aggregate";
}

SensorKind sensor_kind_from_string(std::string_view s) {
  for (auto k : {SensorKind::aggregate_30A, SensorKind::aggregate_100A, SensorKind::aggregate,
                 SensorKind::iam_1s, SensorKind::iam_5s}) {
    if (to_string(k) == s) return k;
  }
  throw Error(Errc::invalid_argument, "unknown sensor kind '" + std::string(s) + "'");
}

void RawSeries::validate() const {
  if (timestamps.size() != values.size()) {
    throw Error(Errc::invalid_argument, "timestamp and value counts differ");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw Error(Errc::invalid_argument, "non-finite reading");
    if (i > 0 && timestamps[i] <= timestamps[i - 1]) {
      throw Error(Errc::invalid_argument, "timestamps must be strictly increasing (at " +
                                              std::to_string(timestamps[i]) + ")");
    }
  }
}

std::size_t PowerSeries::valid_count() const {
  std::size_t n = 0;
  for (auto v : valid) n += v != 0;
  return n;
}

PowerSeries PowerSeries::from_values(std::int64_t start, std::int64_t interval, std::vector<double> values) {
  PowerSeries s;
  s.start_time = start;
  s.interval = interval;
  s.valid.assign(values.size(), 1);
  s.values = std::move(values);
  return s;
}

void align(PowerSeries& a, PowerSeries& b) {
  if (a.interval != b.interval) throw Error(Errc::invalid_argument, "series have different intervals");
  if ((a.start_time - b.start_time) % a.interval != 0) {
    throw Error(Errc::invalid_argument, "series grids are offset from each other");
  }
  const std::int64_t start = std::max(a.start_time, b.start_time);
  const std::int64_t end = std::min(a.end_time(), b.end_time());
  if (end <= start) throw Error(Errc::no_overlap, "series do not overlap in time");
  auto crop = [&](PowerSeries& s) {
    const auto first = static_cast<std::size_t>((start - s.start_time) / s.interval);
    const auto n = static_cast<std::size_t>((end - start) / s.interval);
    s.values = std::vector<double>(s.values.begin() + static_cast<std::ptrdiff_t>(first),
                                   s.values.begin() + static_cast<std::ptrdiff_t>(first + n));
    s.valid = std::vector<std::uint8_t>(s.valid.begin() + static_cast<std::ptrdiff_t>(first),
                                        s.valid.begin() + static_cast<std::ptrdiff_t>(first + n));
    s.start_time = start;
  };
  crop(a);
  crop(b);
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return out;
}

template <typename N>
N parse_number(std::string_view field, const std::filesystem::path& path, std::size_t line_no) {
  N value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(Errc::bad_format, path.string() + ":" + std::to_string(line_no) + ": cannot parse '" +
                                      std::string(field) + "'");
  }
  return value;
}

struct Rows {
  std::vector<std::int64_t> t;
  std::vector<double> v;
  std::vector<std::uint8_t> valid;
  bool has_valid = false;
};

Rows read_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::bad_format, path.string() + ": missing header");
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "timestamp" || header[1] != "power_w") {
    throw Error(Errc::bad_format, path.string() + ": header must start with timestamp,power_w");
  }
  Rows rows;
  rows.has_valid = header.size() >= 3 && header[2] == "valid";
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() < (rows.has_valid ? 3u : 2u)) {
      throw Error(Errc::bad_format, path.string() + ":" + std::to_string(line_no) + ": too few fields");
    }
    rows.t.push_back(parse_number<std::int64_t>(f[0], path, line_no));
    rows.v.push_back(parse_number<double>(f[1], path, line_no));
    if (rows.has_valid) rows.valid.push_back(parse_number<int>(f[2], path, line_no) != 0);
  }
  return rows;
}

void append_double(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

}  // namespace

RawSeries read_raw_csv(const std::filesystem::path& path, SensorKind kind) {
  Rows rows = read_rows(path);
  RawSeries s;
  s.kind = kind;
  for (std::size_t i = 0; i < rows.t.size(); ++i) {
    if (rows.has_valid && !rows.valid[i]) continue;
    s.timestamps.push_back(rows.t[i]);
    s.values.push_back(rows.v[i]);
  }
  s.validate();
  return s;
}

void write_raw_csv(const std::filesystem::path& path, const RawSeries& series) {
  std::string text = "timestamp,power_w\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    text += std::to_string(series.timestamps[i]);
    text += ',';
    append_double(text, series.values[i]);
    text += '\n';
  }
  write_text(path, text);
}

PowerSeries read_power_csv(const std::filesystem::path& path) {
  Rows rows = read_rows(path);
  PowerSeries s;
  if (rows.t.empty()) return s;
  s.start_time = rows.t.front();
  s.interval = rows.t.size() > 1 ? rows.t[1] - rows.t[0] : std::int64_t{8};
  if (s.interval <= 0) throw Error(Errc::bad_format, path.string() + ": timestamps must increase");
  for (std::size_t i = 0; i < rows.t.size(); ++i) {
    if (rows.t[i] != s.time_at(i)) {
      throw Error(Errc::bad_format, path.string() + ": timestamps are not evenly spaced at row " +
                                        std::to_string(i + 2));
    }
  }
  s.values = std::move(rows.v);
  s.valid = rows.has_valid ? std::move(rows.valid) : std::vector<std::uint8_t>(s.values.size(), 1);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.valid[i] && !std::isfinite(s.values[i])) s.valid[i] = 0;
    if (!s.valid[i]) s.values[i] = 0.0;
  }
  return s;
}

void write_power_csv(const std::filesystem::path& path, const PowerSeries& series) {
  std::string text = "timestamp,power_w,valid\n";
  text.reserve(series.size() * 24);
  for (std::size_t i = 0; i < series.size(); ++i) {
    text += std::to_string(series.time_at(i));
    text += ',';
    append_double(text, series.valid[i] ? series.values[i] : 0.0);
    text += series.valid[i] ? ",1\n" : ",0\n";
  }
  write_text(path, text);
}

}  // namespace nilm

#include "dlcz/analysis_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fmt/core.h>
#include <fstream>
#include <istream>
#include <ostream>

#include "dlcz/error.hpp"

namespace dlcz::analysis {

namespace {

constexpr char kBinaryMagic[8] = {'D', 'L', 'C', 'Z', 'T', 'A', 'G', '1'};

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  throw LocatedError(ErrorCode::kParse, fmt::format("line {}: {}", line, what), line, "");
}

std::vector<std::string> split(const std::string& line, char separator = ',') {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == separator) {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(cell);
  return cells;
}

double parse_double(const std::string& text, std::size_t line) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    parse_error(line, fmt::format("'{}' is not a number", text));
  }
  return value;
}

template <typename Int>
Int parse_integer(const std::string& text, std::size_t line) {
  Int value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    parse_error(line, fmt::format("'{}' is not an integer", text));
  }
  return value;
}

Channel parse_channel(const std::string& text, std::size_t line) {
  if (text == "write") return Channel::kWrite;
  if (text == "read1") return Channel::kRead1;
  if (text == "read2") return Channel::kRead2;
  parse_error(line, fmt::format("unknown channel '{}'", text));
}

// Reads "# key=value" comments and the column header; returns the header
// line number. Leaves the stream positioned on the first data row.
struct Preamble {
  std::vector<std::pair<std::string, std::string>> meta;
  std::size_t line = 0;
};

Preamble read_preamble(std::istream& in, const std::string& expected_header,
                       bool exact_header = true) {
  Preamble preamble;
  std::string text;
  while (std::getline(in, text)) {
    ++preamble.line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.rfind('#', 0) == 0) {
      const auto eq = text.find('=');
      if (eq != std::string::npos) {
        std::string key = text.substr(1, eq - 1);
        key.erase(0, key.find_first_not_of(' '));
        key.erase(key.find_last_not_of(' ') + 1);
        preamble.meta.emplace_back(key, text.substr(eq + 1));
      }
      continue;
    }
    if (exact_header && text != expected_header) {
      parse_error(preamble.line, fmt::format("expected header '{}'", expected_header));
    }
    if (!exact_header && split(text).size() != split(expected_header).size()) {
      parse_error(preamble.line, "unexpected column count in header");
    }
    return preamble;
  }
  parse_error(preamble.line + 1, "missing header row");
}

void put_le(std::ostream& out, std::uint64_t value, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((value >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const unsigned char* bytes, int count) {
  std::uint64_t value = 0;
  for (int i = count - 1; i >= 0; --i) value = (value << 8) | bytes[i];
  return value;
}

void check_resolution(double declared, double expected, std::vector<std::string>& warnings) {
  if (expected > 0.0 && std::abs(declared - expected) > 1e-9 * expected) {
    warnings.push_back(fmt::format(
        "timetag resolution mismatch: file declares {} s, expected {} s", declared, expected));
  }
}

}  // namespace

const char* channel_name(Channel channel) {
  switch (channel) {
    case Channel::kWrite: return "write";
    case Channel::kRead1: return "read1";
    case Channel::kRead2: return "read2";
  }
  return "?";
}

void sort_records(std::vector<DetectionRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    if (a.tick != b.tick) return a.tick < b.tick;
    return a.channel < b.channel;
  });
}

void Histogram::validate() const {
  require(bin_edges.size() >= 2, "histogram needs at least one bin");
  require(counts.size() + 1 == bin_edges.size(), "histogram counts/edges size mismatch");
  for (std::size_t i = 1; i < bin_edges.size(); ++i) {
    require(bin_edges[i] > bin_edges[i - 1], "histogram edges must be strictly increasing");
  }
}

double Histogram::sum_between(double begin, double end) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double centre = 0.5 * (bin_edges[i] + bin_edges[i + 1]);
    if (centre >= begin && centre < end) sum += counts[i];
  }
  return sum;
}

Histogram start_stop_histogram(std::span<const DetectionRecord> records, Channel start,
                               std::span<const Channel> stops, double bin_width,
                               double range_begin, double range_end,
                               Normalization normalization, double resolution) {
  require(bin_width > 0.0, "histogram bin width must be > 0");
  require(range_end > range_begin && range_begin >= 0.0, "histogram range must satisfy 0 <= begin < end");
  require(resolution > 0.0, "resolution must be > 0");
  require(!stops.empty(), "histogram needs at least one stop channel");

  std::vector<std::int64_t> start_ticks, stop_ticks;
  for (const DetectionRecord& r : records) {
    if (r.channel == start) start_ticks.push_back(r.tick);
    if (std::find(stops.begin(), stops.end(), r.channel) != stops.end()) stop_ticks.push_back(r.tick);
  }
  if (start_ticks.empty()) throw Error(ErrorCode::kInsufficientStatistics, "start-stop histogram: no start clicks");
  std::sort(start_ticks.begin(), start_ticks.end());
  std::sort(stop_ticks.begin(), stop_ticks.end());

  const auto bins = static_cast<std::size_t>(std::max(1.0, std::round((range_end - range_begin) / bin_width)));
  Histogram histogram;
  histogram.normalization = normalization;
  histogram.starts = start_ticks.size();
  histogram.bin_edges.resize(bins + 1);
  for (std::size_t i = 0; i < bins; ++i) histogram.bin_edges[i] = range_begin + static_cast<double>(i) * bin_width;
  histogram.bin_edges[bins] = range_end;
  histogram.counts.assign(bins, 0.0);

  for (std::int64_t t : start_ticks) {
    const auto first_tick = t + static_cast<std::int64_t>(std::ceil(range_begin / resolution - 1e-9));
    const auto it = std::lower_bound(stop_ticks.begin(), stop_ticks.end(), std::max(first_tick, t));
    if (it == stop_ticks.end()) continue;
    const double delay = static_cast<double>(*it - t) * resolution;
    if (delay < range_begin || delay >= range_end) continue;
    auto bin = static_cast<std::size_t>((delay - range_begin) / bin_width);
    bin = std::min(bin, bins - 1);
    while (bin + 1 < bins && delay >= histogram.bin_edges[bin + 1]) ++bin;
    while (bin > 0 && delay < histogram.bin_edges[bin]) --bin;
    histogram.counts[bin] += 1.0;
  }
  if (normalization == Normalization::kPerStart) {
    for (double& c : histogram.counts) c /= static_cast<double>(histogram.starts);
  }
  return histogram;
}

photon::CoincidenceStats windowed_coincidences(std::span<const DetectionRecord> records,
                                               double window, std::uint64_t trials,
                                               double delay, double resolution) {
  require(window > 0.0, "coincidence window must be > 0");
  require(resolution > 0.0, "resolution must be > 0");
  std::vector<DetectionRecord> sorted(records.begin(), records.end());
  sort_records(sorted);
  const auto window_ticks = static_cast<std::int64_t>(std::llround(window / resolution));
  const auto delay_ticks = static_cast<std::int64_t>(std::llround(delay / resolution));

  struct ReadEvent {
    std::int64_t tick;
    bool read1 = false;
    bool read2 = false;
    bool used = false;
  };
  std::vector<std::int64_t> writes;
  std::vector<ReadEvent> events;
  for (const DetectionRecord& r : sorted) {
    if (r.channel == Channel::kWrite) {
      writes.push_back(r.tick);
      continue;
    }
    if (events.empty() || r.tick - events.back().tick > window_ticks) events.push_back({r.tick});
    (r.channel == Channel::kRead1 ? events.back().read1 : events.back().read2) = true;
  }

  photon::CoincidenceStats stats;
  stats.n_w = writes.size();
  stats.n_r = events.size();
  for (const ReadEvent& e : events) {
    stats.n_r1 += e.read1;
    stats.n_r2 += e.read2;
  }
  stats.trials = trials;
  if (trials < std::max(stats.n_w, stats.n_r)) {
    throw Error(ErrorCode::kInvalidParameter,
                fmt::format("trial count {} is smaller than the number of click events", trials));
  }

  auto event_before = [](const ReadEvent& e, std::int64_t tick) { return e.tick < tick; };
  for (std::int64_t w : writes) {
    const std::int64_t target = w + delay_ticks;
    auto it = std::lower_bound(events.begin(), events.end(), target, event_before);
    ReadEvent* best = nullptr;
    for (; it != events.end() && it->tick <= target + window_ticks; ++it) {
      if (!it->used) {
        best = &*it;  // earliest unused is nearest to the window start
        break;
      }
    }
    if (!best) continue;
    best->used = true;
    ++stats.n_wr;
    stats.n_wr1 += best->read1;
    stats.n_wr2 += best->read2;
    stats.n_wr1r2 += best->read1 && best->read2;
  }
  return stats;
}

// ------------------------------------------------------------------ CSV

void export_csv(const Histogram& histogram, std::ostream& out) {
  histogram.validate();
  out << "# normalization="
      << (histogram.normalization == Normalization::kRaw ? "raw" : "per-start") << '\n';
  out << "# starts=" << histogram.starts << '\n';
  out << "bin_begin_s,bin_end_s,count\n";
  for (std::size_t i = 0; i < histogram.counts.size(); ++i) {
    out << fmt::format("{},{},{}\n", histogram.bin_edges[i], histogram.bin_edges[i + 1],
                       histogram.counts[i]);
  }
}

Histogram import_histogram_csv(std::istream& in) {
  Preamble preamble = read_preamble(in, "bin_begin_s,bin_end_s,count");
  Histogram histogram;
  for (const auto& [key, value] : preamble.meta) {
    if (key == "normalization") {
      if (value == "raw") histogram.normalization = Normalization::kRaw;
      else if (value == "per-start") histogram.normalization = Normalization::kPerStart;
      else parse_error(1, fmt::format("unknown normalization '{}'", value));
    } else if (key == "starts") {
      histogram.starts = parse_integer<std::uint64_t>(value, 1);
    }
  }
  std::size_t line = preamble.line;
  std::string text;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    const auto cells = split(text);
    if (cells.size() != 3) parse_error(line, fmt::format("expected 3 columns, found {}", cells.size()));
    const double begin = parse_double(cells[0], line);
    const double end = parse_double(cells[1], line);
    const double count = parse_double(cells[2], line);
    if (histogram.bin_edges.empty()) {
      histogram.bin_edges.push_back(begin);
    } else if (histogram.bin_edges.back() != begin) {
      parse_error(line, "bins are not contiguous");
    }
    histogram.bin_edges.push_back(end);
    histogram.counts.push_back(count);
  }
  histogram.validate();
  return histogram;
}

void export_csv(std::span<const CurvePoint> curve, std::ostream& out, const std::string& value_name) {
  out << fmt::format("time_s,{0},{0}_err\n", value_name);
  for (const CurvePoint& p : curve) {
    out << fmt::format("{},{},{}\n", p.time, p.value, p.standard_error);
  }
}

std::vector<CurvePoint> import_curve_csv(std::istream& in) {
  const Preamble preamble = read_preamble(in, "time_s,value,value_err", false);
  std::vector<CurvePoint> curve;
  std::size_t line = preamble.line;
  std::string text;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    const auto cells = split(text);
    if (cells.size() != 3) parse_error(line, fmt::format("expected 3 columns, found {}", cells.size()));
    curve.push_back({parse_double(cells[0], line), parse_double(cells[1], line),
                     parse_double(cells[2], line)});
  }
  return curve;
}

void export_csv(const TimetagStream& stream, std::ostream& out) {
  out << fmt::format("# resolution_s={}\n", stream.resolution);
  out << "tick,channel,ensemble_id,trial_index\n";
  for (const DetectionRecord& r : stream.records) {
    out << fmt::format("{},{},{},{}\n", r.tick, channel_name(r.channel), r.ensemble_id, r.trial_index);
  }
}

ImportResult import_timetags_csv(std::istream& in, double expected_resolution) {
  const Preamble preamble = read_preamble(in, "tick,channel,ensemble_id,trial_index");
  ImportResult result;
  bool declared = false;
  for (const auto& [key, value] : preamble.meta) {
    if (key == "resolution_s") {
      result.stream.resolution = parse_double(value, 1);
      declared = true;
    }
  }
  if (!declared) parse_error(1, "missing '# resolution_s=' header");
  require(result.stream.resolution > 0.0, "timetag resolution must be > 0");
  check_resolution(result.stream.resolution, expected_resolution, result.warnings);
  std::size_t line = preamble.line;
  std::string text;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    const auto cells = split(text);
    if (cells.size() != 4) parse_error(line, fmt::format("expected 4 columns, found {}", cells.size()));
    DetectionRecord r;
    r.tick = parse_integer<std::int64_t>(cells[0], line);
    r.channel = parse_channel(cells[1], line);
    r.ensemble_id = parse_integer<std::uint64_t>(cells[2], line);
    r.trial_index = parse_integer<std::uint32_t>(cells[3], line);
    result.stream.records.push_back(r);
  }
  return result;
}

void write_timetags_binary(const TimetagStream& stream, std::ostream& out) {
  require(stream.resolution > 0.0, "timetag resolution must be > 0");
  out.write(kBinaryMagic, sizeof(kBinaryMagic));
  put_le(out, static_cast<std::uint64_t>(std::llround(stream.resolution * 1e15)), 8);
  for (const DetectionRecord& r : stream.records) {
    put_le(out, static_cast<std::uint64_t>(r.tick), 8);
    put_le(out, static_cast<std::uint64_t>(r.channel), 1);
    put_le(out, 0, 7);
  }
}

ImportResult read_timetags_binary(std::istream& in, double expected_resolution) {
  std::array<unsigned char, 16> block{};
  if (!in.read(reinterpret_cast<char*>(block.data()), block.size())) {
    throw Error(ErrorCode::kParse, "binary timetags: truncated header");
  }
  if (!std::equal(std::begin(kBinaryMagic), std::end(kBinaryMagic), block.begin())) {
    throw Error(ErrorCode::kParse, "binary timetags: bad magic");
  }
  ImportResult result;
  const std::uint64_t femtoseconds = get_le(block.data() + 8, 8);
  require(femtoseconds > 0, "binary timetags: zero resolution");
  result.stream.resolution = static_cast<double>(femtoseconds) * 1e-15;
  check_resolution(result.stream.resolution, expected_resolution, result.warnings);
  std::size_t index = 0;
  while (true) {
    in.read(reinterpret_cast<char*>(block.data()), block.size());
    if (in.gcount() == 0) break;
    if (in.gcount() != static_cast<std::streamsize>(block.size())) {
      throw Error(ErrorCode::kParse, fmt::format("binary timetags: truncated record {}", index));
    }
    const auto channel = block[8];
    if (channel > 2) {
      throw Error(ErrorCode::kParse, fmt::format("binary timetags: bad channel {} in record {}", channel, index));
    }
    DetectionRecord r;
    r.tick = static_cast<std::int64_t>(get_le(block.data(), 8));
    r.channel = static_cast<Channel>(channel);
    result.stream.records.push_back(r);
    ++index;
  }
  return result;
}

TimetagFormat parse_timetag_format(const std::string& name) {
  if (name == "csv") return TimetagFormat::kCsv;
  if (name == "binary" || name == "bin") return TimetagFormat::kBinary;
  throw_invalid(fmt::format("unknown timetag format '{}' (expected csv or binary)", name));
}

void save_timetags(const TimetagStream& stream, const std::filesystem::path& path,
                   TimetagFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", path.string()));
  if (format == TimetagFormat::kCsv) export_csv(stream, out);
  else write_timetags_binary(stream, out);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("write failed for {}", path.string()));
}

ImportResult load_timetags(const std::filesystem::path& path, TimetagFormat format,
                           double expected_resolution) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot read {}", path.string()));
  return format == TimetagFormat::kCsv ? import_timetags_csv(in, expected_resolution)
                                       : read_timetags_binary(in, expected_resolution);
}

}  // namespace dlcz::analysis

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dlcz/photon_stats.hpp"
#include "dlcz/types.hpp"

namespace dlcz::analysis {

enum class Channel : std::uint8_t { kWrite = 0, kRead1 = 1, kRead2 = 2 };

const char* channel_name(Channel channel);

/// One detector click. Times are integer ticks of the stream resolution.
struct DetectionRecord {
  std::int64_t tick = 0;
  Channel channel = Channel::kWrite;
  std::uint64_t ensemble_id = 0;
  std::uint32_t trial_index = 0;

  friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

inline constexpr double kDefaultResolution = 1e-9;  // s per tick

struct TimetagStream {
  double resolution = kDefaultResolution;
  std::vector<DetectionRecord> records;

  friend bool operator==(const TimetagStream&, const TimetagStream&) = default;
};

/// Stable sort by (tick, channel).
void sort_records(std::vector<DetectionRecord>& records);

enum class Normalization { kRaw, kPerStart };

struct Histogram {
  std::vector<double> bin_edges;  // s
  std::vector<double> counts;
  Normalization normalization = Normalization::kRaw;
  std::uint64_t starts = 0;

  void validate() const;
  /// Sum of counts over bins whose centre lies in [begin, end).
  double sum_between(double begin, double end) const;

  friend bool operator==(const Histogram&, const Histogram&) = default;
};

/// For every start click, the first later stop click whose delay falls in
/// [range_begin, range_end) increments its bin. Records need not be sorted.
Histogram start_stop_histogram(std::span<const DetectionRecord> records, Channel start,
                               std::span<const Channel> stops, double bin_width,
                               double range_begin, double range_end,
                               Normalization normalization = Normalization::kRaw,
                               double resolution = kDefaultResolution);

/// Counts write-read pairs and write-read1-read2 triples. A stop belongs
/// to a start when its delay lies in [delay, delay + window]; each start
/// takes the nearest unused stop per read channel and every stop is used at
/// most once. `trials` is the number of trials behind the records.
photon::CoincidenceStats windowed_coincidences(std::span<const DetectionRecord> records,
                                               double window, std::uint64_t trials,
                                               double delay = 0.0,
                                               double resolution = kDefaultResolution);

// ------------------------------------------------------------------ CSV

/// Columns: bin_begin_s,bin_end_s,count. Header comments carry the
/// normalisation and start count.
void export_csv(const Histogram& histogram, std::ostream& out);
Histogram import_histogram_csv(std::istream& in);

/// Columns: time_s,value,error.
void export_csv(std::span<const CurvePoint> curve, std::ostream& out,
                const std::string& value_name = "eta");
std::vector<CurvePoint> import_curve_csv(std::istream& in);

/// Columns: tick,channel,ensemble_id,trial_index; resolution in a header comment.
void export_csv(const TimetagStream& stream, std::ostream& out);

struct ImportResult {
  TimetagStream stream;
  std::vector<std::string> warnings;
};

/// `expected_resolution` > 0 produces a warning when the file declares a
/// different tick size.
ImportResult import_timetags_csv(std::istream& in, double expected_resolution = 0.0);

/// Binary layout (little-endian): 16-byte header "DLCZTAG1" + uint64
/// resolution in femtoseconds, then 16-byte records: int64 tick, uint8
/// channel, 7 zero bytes.
void write_timetags_binary(const TimetagStream& stream, std::ostream& out);
ImportResult read_timetags_binary(std::istream& in, double expected_resolution = 0.0);

enum class TimetagFormat { kCsv, kBinary };
TimetagFormat parse_timetag_format(const std::string& name);

void save_timetags(const TimetagStream& stream, const std::filesystem::path& path,
                   TimetagFormat format);
ImportResult load_timetags(const std::filesystem::path& path, TimetagFormat format,
                           double expected_resolution = 0.0);

}  // namespace dlcz::analysis

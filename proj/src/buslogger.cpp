#include "persival/buslogger.hpp"

#include <array>
#include <charconv>

namespace persival::probe {

namespace {

constexpr std::string_view kHeader = "index,command,bank_group,bank,row,column";

uint64_t parse_field(std::string_view tok, size_t line, const char* what, uint64_t max) {
  uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw CsvError(line, std::string("malformed ") + what);
  if (value > max) throw CsvError(line, std::string(what) + " out of range");
  return value;
}

}  // namespace

CsvError::CsvError(size_t line, const std::string& message)
    : std::runtime_error("csv line " + std::to_string(line) + ": " + message), line_(line) {}

LiveCapture::LiveCapture(CaptureConfig config) {
  if (config.depth == 0) throw std::invalid_argument("capture depth must be at least 1");
  trace_.config = std::move(config);
}

void LiveCapture::on_write(const sim::BusEvent& event) {
  // Every bus command the probe sees is a WR, so the first event both arms
  // and fires the trigger; qualification then decides what is stored.
  if (full()) return;
  if (trace_.config.qualification && !trace_.config.qualification->matches(event.address)) return;
  trace_.records.push_back({event.seq, event.address});
}

Trace capture(std::span<const sim::BusEvent> events, const CaptureConfig& config) {
  LiveCapture live(config);
  for (const auto& event : events) {
    if (live.full()) break;
    live.on_write(event);
  }
  return live.take();
}

std::string export_csv(const Trace& trace) {
  std::string out;
  out.reserve(trace.records.size() * 24 + kHeader.size() + 1);
  out += kHeader;
  out += '\n';
  for (const auto& rec : trace.records) {
    out += std::to_string(rec.index);
    out += ",WR,";
    out += std::to_string(rec.address.bank_group);
    out += ',';
    out += std::to_string(rec.address.bank);
    out += ',';
    out += std::to_string(rec.address.row);
    out += ',';
    out += std::to_string(rec.address.column);
    out += '\n';
  }
  return out;
}

Trace parse_csv(std::string_view text) {
  Trace trace;
  size_t lineno = 0;
  size_t pos = 0;
  bool header_seen = false;
  bool have_prev_index = false;
  uint64_t prev_index = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, (eol == std::string_view::npos ? text.size() : eol) - pos);
    pos = (eol == std::string_view::npos) ? text.size() : eol + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header_seen) {
      if (line != kHeader) throw CsvError(lineno, "missing or malformed header");
      header_seen = true;
      continue;
    }
    if (line.empty()) throw CsvError(lineno, "empty row");

    std::array<std::string_view, 6> fields;
    size_t field_count = 0;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (field_count >= fields.size()) throw CsvError(lineno, "too many fields");
        fields[field_count++] = line.substr(start, i - start);
        start = i + 1;
      }
    }
    if (field_count != 6) throw CsvError(lineno, "expected 6 fields");
    if (fields[1] != "WR") throw CsvError(lineno, "command must be WR");

    TraceRecord rec;
    rec.index = parse_field(fields[0], lineno, "index", UINT64_MAX);
    rec.address.bank_group = static_cast<uint32_t>(parse_field(fields[2], lineno, "bank_group", 3));
    rec.address.bank = static_cast<uint32_t>(parse_field(fields[3], lineno, "bank", 3));
    rec.address.row = static_cast<uint32_t>(parse_field(fields[4], lineno, "row", (1u << 18) - 1));
    rec.address.column = static_cast<uint32_t>(parse_field(fields[5], lineno, "column", (1u << 10) - 1));
    if (have_prev_index && rec.index <= prev_index)
      throw CsvError(lineno, "record indices must be strictly increasing");
    prev_index = rec.index;
    have_prev_index = true;
    trace.records.push_back(rec);
  }
  if (!header_seen) throw CsvError(1, "missing or malformed header");
  trace.config.depth = std::max(trace.records.size(), kDefaultDepth);
  return trace;
}

}  // namespace persival::probe

// SPDX-License-Identifier: Apache-2.0
#include "qrobust/dataset.hpp"

#include <algorithm>
#include <charconv>

#include "qrobust/binary_io.hpp"
#include "qrobust/errors.hpp"

namespace qrobust {

namespace {

std::optional<long long> parse_int(std::string_view s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; });
}

}  // namespace

Dataset parse_dataset(std::string_view tsv, std::string name,
                      std::optional<std::size_t> num_classes, Split split) {
  Dataset ds;
  ds.name = std::move(name);
  ds.split = split;

  std::vector<std::size_t> label_lines;
  std::vector<std::size_t> bad_lines;
  long long max_label = 1;
  bool first_row = true;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < tsv.size()) {
    std::size_t end = tsv.find('\n', start);
    if (end == std::string_view::npos) end = tsv.size();
    std::string_view line = tsv.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (is_blank(line)) continue;

    const auto tabs = std::count(line.begin(), line.end(), '\t');
    if (tabs != 1) {
      throw ParseError("expected 2 tab-separated columns, found " + std::to_string(tabs + 1),
                       line_no);
    }
    const std::size_t tab = line.find('\t');
    const std::string_view text = line.substr(0, tab);
    const auto label = parse_int(line.substr(tab + 1));
    if (!label) {
      if (first_row) {
        first_row = false;
        continue;  // header
      }
      throw ParseError("label '" + std::string(line.substr(tab + 1)) + "' is not an integer",
                       line_no);
    }
    first_row = false;
    if (is_blank(text)) {
      ++ds.dropped_empty;
      continue;
    }
    if (*label < 0 || (num_classes && static_cast<unsigned long long>(*label) >= *num_classes)) {
      bad_lines.push_back(line_no);
      continue;
    }
    max_label = std::max(max_label, *label);
    ds.examples.push_back({std::string(text), static_cast<int>(*label)});
  }
  if (!bad_lines.empty()) {
    std::string msg = "unknown label values on lines";
    for (std::size_t i = 0; i < bad_lines.size(); ++i) {
      msg += (i ? ", " : " ") + std::to_string(bad_lines[i]);
    }
    throw ParseError(msg, 0);
  }
  ds.num_classes = num_classes ? *num_classes : static_cast<std::size_t>(max_label + 1);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, std::string name,
                     std::optional<std::size_t> num_classes, Split split) {
  return parse_dataset(read_file(path), std::move(name), num_classes, split);
}

std::string format_dataset(const Dataset& dataset) {
  std::string out;
  for (const auto& ex : dataset.examples) {
    if (ex.text.find_first_of("\t\n") != std::string::npos) {
      throw ContractViolation("dataset text contains a tab or newline: " + ex.text);
    }
    out += ex.text;
    out.push_back('\t');
    out += std::to_string(ex.label);
    out.push_back('\n');
  }
  return out;
}

}  // namespace qrobust

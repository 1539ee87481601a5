// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_DATASET_HPP_
#define QROBUST_DATASET_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qrobust {

enum class Split { kTrain, kDev, kTest };

struct Example {
  std::string text;
  int label = 0;
};

struct Dataset {
  std::string name;
  std::vector<Example> examples;
  std::size_t num_classes = 2;
  Split split = Split::kTrain;
  /// Rows dropped at ingestion because their text was empty.
  std::size_t dropped_empty = 0;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
};

/// Parses "text<TAB>label" rows. A first row whose label column is not an
/// integer is treated as a header. When `num_classes` is absent it is
/// inferred as max label + 1 (at least 2).
Dataset parse_dataset(std::string_view tsv, std::string name,
                      std::optional<std::size_t> num_classes = std::nullopt,
                      Split split = Split::kTrain);
Dataset load_dataset(const std::filesystem::path& path, std::string name,
                     std::optional<std::size_t> num_classes = std::nullopt,
                     Split split = Split::kTrain);

/// Headerless TSV; texts must not contain tabs or newlines.
std::string format_dataset(const Dataset& dataset);

}  // namespace qrobust

#endif  // QROBUST_DATASET_HPP_

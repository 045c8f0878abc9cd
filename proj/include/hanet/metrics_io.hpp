#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hanet/errors.hpp"
#include "hanet/train.hpp"

namespace hanet {

// metrics.csv schema (versioned in the header comment). One row per epoch;
// the test_* columns are filled only on the final row. Every field is
// printed with fixed six-decimal formatting so identical runs produce
// byte-identical files; wall time deliberately stays out of the file.
inline constexpr const char* kMetricsSchema =
    "epoch,train_loss,val_accuracy,val_pruned_word_frac,val_pruned_sent_frac,"
    "val_mean_support,test_accuracy,test_pruned_word_frac,"
    "test_pruned_sent_frac,test_mean_support";

namespace detail {

inline std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace detail

inline void write_metrics_csv(const std::filesystem::path& path,
                              const std::vector<MetricsRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write metrics to " + path.string());
  out << "# hanet-metrics v1\n" << kMetricsSchema << "\n";
  for (const MetricsRecord& r : records) {
    out << r.epoch << ',' << detail::fixed6(r.train_loss) << ','
        << detail::fixed6(r.validation_accuracy) << ','
        << detail::fixed6(r.validation_stats.pruned_word_fraction) << ','
        << detail::fixed6(r.validation_stats.pruned_sentence_fraction) << ','
        << detail::fixed6(r.validation_stats.mean_support_size) << ',';
    if (r.test_accuracy) {
      const AttentionStats& ts = r.test_stats.value();
      out << detail::fixed6(*r.test_accuracy) << ','
          << detail::fixed6(ts.pruned_word_fraction) << ','
          << detail::fixed6(ts.pruned_sentence_fraction) << ','
          << detail::fixed6(ts.mean_support_size);
    } else {
      out << ",,,";
    }
    out << '\n';
  }
}

struct MetricsRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_pruned_word_frac = 0.0;
  double val_pruned_sent_frac = 0.0;
  double val_mean_support = 0.0;
  std::optional<double> test_accuracy;
  std::optional<double> test_pruned_word_frac;
  std::optional<double> test_pruned_sent_frac;
  std::optional<double> test_mean_support;
};

inline std::vector<MetricsRow> read_metrics_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read metrics from " + path.string());
  std::vector<MetricsRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("epoch,", 0) == 0)
      continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    fields.resize(10);
    MetricsRow row;
    row.epoch = std::stoul(fields[0]);
    row.train_loss = std::stod(fields[1]);
    row.val_accuracy = std::stod(fields[2]);
    row.val_pruned_word_frac = std::stod(fields[3]);
    row.val_pruned_sent_frac = std::stod(fields[4]);
    row.val_mean_support = std::stod(fields[5]);
    auto opt = [](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return std::stod(s);
    };
    row.test_accuracy = opt(fields[6]);
    row.test_pruned_word_frac = opt(fields[7]);
    row.test_pruned_sent_frac = opt(fields[8]);
    row.test_mean_support = opt(fields[9]);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace hanet

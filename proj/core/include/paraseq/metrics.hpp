#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "paraseq/corpus.hpp"

namespace paraseq {

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  bool absent = false;  // class missing from both gold and predictions
};

/// Accuracy runs over all four classes; mean_f1 is the unweighted arithmetic
/// mean of the basic/theorem/proof F1 values (Overlap excluded). Zero
/// divisions yield 0 and are flagged.
struct Metrics {
  double accuracy = 0;
  double mean_f1 = 0;
  std::array<ClassMetrics, 3> per_class;                     // basic, theorem, proof
  std::array<std::array<std::int64_t, 4>, 4> confusion{};    // [gold][pred]
  std::vector<std::string> flags;

  nlohmann::ordered_json to_json() const;
};

Metrics evaluate(const std::vector<Label>& predictions, const std::vector<Label>& gold);
Metrics evaluate(const std::vector<int>& predictions, const std::vector<int>& gold);

}  // namespace paraseq

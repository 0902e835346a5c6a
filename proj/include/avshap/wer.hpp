#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace avshap {

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;

  std::size_t total() const { return substitutions + deletions + insertions; }
};

std::vector<std::string> split_words(std::string_view text);

// Minimum-cost word alignment; ties prefer substitution, then deletion.
EditCounts count_edits(const std::vector<std::string>& reference,
                       const std::vector<std::string>& hypothesis);

// Word error rate: edits / reference length. Throws MetricError on an empty
// reference.
double wer(const std::vector<std::string>& reference, const std::vector<std::string>& hypothesis);
double wer(std::string_view reference, std::string_view hypothesis);

}  // namespace avshap

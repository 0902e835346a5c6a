#include "avshap/wer.hpp"

#include <algorithm>
#include <sstream>

#include "avshap/error.hpp"

namespace avshap {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream ss{std::string(text)};
  std::string w;
  while (ss >> w) words.push_back(w);
  return words;
}

EditCounts count_edits(const std::vector<std::string>& reference,
                       const std::vector<std::string>& hypothesis) {
  const std::size_t m = reference.size();
  const std::size_t n = hypothesis.size();
  std::vector<std::vector<std::size_t>> d(m + 1, std::vector<std::size_t>(n + 1, 0));
  for (std::size_t i = 0; i <= m; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= n; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t sub = d[i - 1][j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      d[i][j] = std::min({sub, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }
  EditCounts c;
  std::size_t i = m;
  std::size_t j = n;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        d[i][j] == d[i - 1][j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1)) {
      if (reference[i - 1] != hypothesis[j - 1]) ++c.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++c.deletions;
      --i;
    } else {
      ++c.insertions;
      --j;
    }
  }
  return c;
}

double wer(const std::vector<std::string>& reference, const std::vector<std::string>& hypothesis) {
  if (reference.empty()) throw MetricError("WER needs a nonempty reference");
  return static_cast<double>(count_edits(reference, hypothesis).total()) /
         static_cast<double>(reference.size());
}

double wer(std::string_view reference, std::string_view hypothesis) {
  return wer(split_words(reference), split_words(hypothesis));
}

}  // namespace avshap

// Copyright 2026 The Chunkspace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CHUNKSPACE_CORPUS_CSV_HPP_
#define CHUNKSPACE_CORPUS_CSV_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "chunkspace/corpus/motion.hpp"

namespace chunkspace {

/// Thrown by load_corpus with the offending file:line in the message.
class CorpusParseError : public std::runtime_error {
 public:
  CorpusParseError(const std::string& path, int64_t line,
                   const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what) {}
};

namespace detail {

inline std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

inline bool ParseDouble(const std::string& s, double* out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
  auto [ptr, ec] = std::from_chars(begin, end, *out);
  return ec == std::errc() && ptr == end && begin != end;
}

}  // namespace detail

/// Reads a corpus CSV with header `time,q0,...,q{D-1}`.  The sample rate is
/// inferred from the median time delta; non-monotone time, ragged rows and
/// non-finite values are rejected with the line number.
inline MotionSequence LoadCorpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);

  std::string line;
  int64_t line_no = 1;
  if (!std::getline(in, line)) {
    throw CorpusParseError(path, 1, "empty file");
  }
  const auto header = detail::SplitCsvLine(line);
  if (header.empty() || header[0] != "time") {
    throw CorpusParseError(path, 1, "header must start with 'time'");
  }
  const int64_t dof = static_cast<int64_t>(header.size()) - 1;
  if (dof < 1) throw CorpusParseError(path, 1, "header declares no joints");
  for (int64_t j = 0; j < dof; ++j) {
    if (header[j + 1] != "q" + std::to_string(j)) {
      throw CorpusParseError(path, 1,
                             "expected column 'q" + std::to_string(j) +
                                 "', got '" + header[j + 1] + "'");
    }
  }

  MotionSequence seq;
  seq.dof = dof;
  std::vector<double> times;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::SplitCsvLine(line);
    if (static_cast<int64_t>(fields.size()) != dof + 1) {
      throw CorpusParseError(path, line_no,
                             "expected " + std::to_string(dof + 1) +
                                 " fields, got " +
                                 std::to_string(fields.size()));
    }
    double t;
    if (!detail::ParseDouble(fields[0], &t) || !std::isfinite(t)) {
      throw CorpusParseError(path, line_no, "bad time value '" + fields[0] + "'");
    }
    if (!times.empty() && t <= times.back()) {
      throw CorpusParseError(path, line_no, "time is not strictly increasing");
    }
    times.push_back(t);
    for (int64_t j = 0; j < dof; ++j) {
      double v;
      if (!detail::ParseDouble(fields[j + 1], &v) || !std::isfinite(v)) {
        throw CorpusParseError(path, line_no,
                               "non-finite or malformed value in column q" +
                                   std::to_string(j));
      }
      seq.data.push_back(v);
    }
  }
  if (times.empty()) throw CorpusParseError(path, line_no, "no data rows");

  if (times.size() == 1) {
    seq.rate_hz = 1.0;
  } else {
    std::vector<double> deltas(times.size() - 1);
    for (size_t i = 0; i + 1 < times.size(); ++i) deltas[i] = times[i + 1] - times[i];
    std::nth_element(deltas.begin(), deltas.begin() + deltas.size() / 2,
                     deltas.end());
    const double median_dt = deltas[deltas.size() / 2];
    if (median_dt <= 0.0) {
      throw CorpusParseError(path, line_no, "non-positive median time delta");
    }
    seq.rate_hz = 1.0 / median_dt;
  }
  return seq;
}

/// Writes the CSV format read back by LoadCorpus.  The time column is
/// i / rate_hz; values are printed with enough digits to round-trip well
/// below 1e-6.
inline void SaveCorpus(const MotionSequence& seq, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  out << "time";
  for (int64_t j = 0; j < seq.dof; ++j) out << ",q" << j;
  out << "\n";
  char buf[64];
  for (int64_t t = 0; t < seq.frames(); ++t) {
    std::snprintf(buf, sizeof(buf), "%.9f", static_cast<double>(t) / seq.rate_hz);
    out << buf;
    const double* f = seq.frame(t);
    for (int64_t j = 0; j < seq.dof; ++j) {
      std::snprintf(buf, sizeof(buf), "%.12g", f[j]);
      out << "," << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace chunkspace

#endif  // CHUNKSPACE_CORPUS_CSV_HPP_

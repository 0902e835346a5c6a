#pragma once

#include <stdexcept>
#include <string>

namespace avshap {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid feature partition or coalition mask.
class PartitionError : public Error {
 public:
  using Error::Error;
};

// Estimator preconditions (budget, exact cap) not met.
class EstimatorError : public Error {
 public:
  using Error::Error;
};

// Metric preconditions (window/bin counts) not met.
class MetricError : public Error {
 public:
  using Error::Error;
};

// Unreadable or invalid configuration text. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A scoring call failed for one utterance: non-finite scores, wrong vector
// length, a remote error reply or a repeated timeout. The run records it and
// moves on to the next utterance.
class ScoreError : public Error {
 public:
  using Error::Error;
};

// The scorer itself is unusable: transport failure, handshake failure or a
// protocol violation. Maps to CLI exit code 3.
class BridgeError : public Error {
 public:
  using Error::Error;
};

}  // namespace avshap

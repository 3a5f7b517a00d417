#pragma once

#include <stdexcept>
#include <string>

namespace logloom {

// Base class for every error raised by the pipeline. Each subclass maps to a
// CLI exit code in tools/logloom.cpp.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  LabelError(const std::string& what, long long line_no)
      : Error(what), line_no_(line_no) {}
  long long line_no() const { return line_no_; }

 private:
  long long line_no_;
};

class MissingVector : public Error {
 public:
  explicit MissingVector(int template_id)
      : Error("no vector for template id " + std::to_string(template_id)),
        template_id_(template_id) {}
  int template_id() const { return template_id_; }

 private:
  int template_id_;
};

class DependencyError : public Error {
 public:
  using Error::Error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Numeric failures: exit code 4.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, int epoch)
      : NumericalError(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class DegenerateEmbedding : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EigenFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class MetricUndefined : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace logloom

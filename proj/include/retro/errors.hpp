#pragma once

#include <stdexcept>
#include <string>

namespace retro {

// Base for every error raised by the library. The CLI maps the three
// families below onto exit codes 2 (config), 3 (data) and 4 (runtime).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

// numerics
class DimensionError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class IndexError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

// datapipe
class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class FeatureError : public DataError {
 public:
  using DataError::DataError;
};

class EmptyBatchError : public DataError {
 public:
  using DataError::DataError;
};

// readers
class LabelError : public DataError {
 public:
  using DataError::DataError;
};

class SegmentationError : public DataError {
 public:
  using DataError::DataError;
};

class ScoringError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

// decision
class AggregationError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class SearchError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class ExtractionError : public DataError {
 public:
  using DataError::DataError;
};

// evaluation
class AlignmentError : public DataError {
 public:
  using DataError::DataError;
};

class EvaluationError : public DataError {
 public:
  using DataError::DataError;
};

// trainer
class TrainingError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class ScheduleError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace retro

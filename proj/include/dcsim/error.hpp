#pragma once

#include <stdexcept>
#include <string>

namespace dcsim {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside its documented range (rank too large, negative lambda, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Operand dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but carries no usable signal (e.g. zero variance).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// CSV ingestion failure; the message names the offending row or column.
class IngestionError : public Error {
 public:
  using Error::Error;
};

// Experiment configuration rejected during validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Failure inside the collaboration pipeline, tagged with the protocol step.
class PipelineError : public Error {
 public:
  PipelineError(int step, const std::string& what)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace dcsim

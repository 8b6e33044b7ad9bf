#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pho {

// Process exit codes shared by every command.
enum class ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kDegenerate = 3,
  kDivergence = 4,
  kEvalPrecondition = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what)
      : Error(ExitCode::kInputError, "dimension mismatch: " + what) {}
};

class NonFiniteValue : public Error {
 public:
  explicit NonFiniteValue(const std::string& what)
      : Error(ExitCode::kInputError, "non-finite value: " + what) {}
};

class EmptyModality : public Error {
 public:
  explicit EmptyModality(const std::string& what)
      : Error(ExitCode::kInputError, "empty modality: " + what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ExitCode::kInputError, what) {}
};

class DegenerateInput : public Error {
 public:
  explicit DegenerateInput(const std::string& what)
      : Error(ExitCode::kDegenerate, "degenerate input: " + what) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error(ExitCode::kInputError,
              "parse error at line " + std::to_string(line) + ": " + reason),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UnknownModality : public Error {
 public:
  UnknownModality(std::size_t line, const std::string& tag)
      : Error(ExitCode::kInputError, "unknown modality '" + tag +
                                         "' at line " + std::to_string(line)),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class LabelOutOfRange : public Error {
 public:
  explicit LabelOutOfRange(const std::string& what)
      : Error(ExitCode::kInputError, "label out of range: " + what) {}
};

class NoValidClasses : public Error {
 public:
  NoValidClasses()
      : Error(ExitCode::kDegenerate,
              "no class has both visible and infrared members") {}
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(std::size_t batch_index)
      : Error(ExitCode::kDivergence,
              "non-finite loss at batch " + std::to_string(batch_index)),
        batch_index_(batch_index) {}
  std::size_t batch_index() const noexcept { return batch_index_; }

 private:
  std::size_t batch_index_;
};

class QueryClassAbsent : public Error {
 public:
  explicit QueryClassAbsent(int class_id)
      : Error(ExitCode::kEvalPrecondition,
              "query class " + std::to_string(class_id) +
                  " does not appear in the gallery"),
        class_id_(class_id) {}
  int class_id() const noexcept { return class_id_; }

 private:
  int class_id_;
};

}  // namespace pho

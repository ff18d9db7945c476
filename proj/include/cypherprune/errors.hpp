#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cypherprune {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
    kSuccess = 0,
    kUsage = 1,
    kData = 2,
    kExecutor = 3,
};

/// Base class for every error raised by the library. `exit_code()` tells the
/// CLI which status to terminate with.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
    [[nodiscard]] virtual ExitCode exit_code() const noexcept { return ExitCode::kData; }
};

enum class DatasetErrc {
    kMissingFile,
    kMalformedLine,
    kDuplicateRecordId,
    kEmptyDataset,
    kIoFailure,
    kEmptyInput,
};

class DatasetError : public Error {
  public:
    DatasetError(DatasetErrc code, std::string message, std::size_t line_no = 0)
        : Error(std::move(message)), code_(code), line_no_(line_no) {}

    [[nodiscard]] DatasetErrc code() const noexcept { return code_; }
    /// 1-based line number for kMalformedLine, 0 otherwise.
    [[nodiscard]] std::size_t line_no() const noexcept { return line_no_; }

  private:
    DatasetErrc code_;
    std::size_t line_no_;
};

enum class SelectionErrc {
    kEmptyCandidateSet,
    kInvalidSpec,
    kMissingProfile,
};

class SelectionError : public Error {
  public:
    SelectionError(SelectionErrc code, std::string message)
        : Error(std::move(message)), code_(code) {}
    [[nodiscard]] SelectionErrc code() const noexcept { return code_; }

  private:
    SelectionErrc code_;
};

enum class MetricErrc {
    kEmptyInput,
    kUnknownRecordId,
    kInvalidArgument,
};

class MetricError : public Error {
  public:
    MetricError(MetricErrc code, std::string message)
        : Error(std::move(message)), code_(code) {}
    [[nodiscard]] MetricErrc code() const noexcept { return code_; }

  private:
    MetricErrc code_;
};

enum class ExecutionErrc {
    kConnectionFailure,
    kWriteQueryRefused,
    kAllSkipped,
    kBadFixture,
    kInvalidBinding,
};

class ExecutionError : public Error {
  public:
    ExecutionError(ExecutionErrc code, std::string message)
        : Error(std::move(message)), code_(code) {}
    [[nodiscard]] ExecutionErrc code() const noexcept { return code_; }
    [[nodiscard]] ExitCode exit_code() const noexcept override {
        // A fixture with nothing evaluable is a data problem, not an executor one.
        return code_ == ExecutionErrc::kAllSkipped || code_ == ExecutionErrc::kBadFixture
                   ? ExitCode::kData
                   : ExitCode::kExecutor;
    }

  private:
    ExecutionErrc code_;
};

class ConfigError : public Error {
  public:
    using Error::Error;
    [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }
};

/// Wraps an error raised inside a pipeline stage, prefixing the stage name.
class StageError : public Error {
  public:
    StageError(std::string stage, const Error& cause)
        : Error(stage + ": " + cause.what()), stage_(std::move(stage)),
          exit_code_(cause.exit_code()) {}
    StageError(std::string stage, std::string message, ExitCode code)
        : Error(stage + ": " + message), stage_(std::move(stage)), exit_code_(code) {}

    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }
    [[nodiscard]] ExitCode exit_code() const noexcept override { return exit_code_; }

  private:
    std::string stage_;
    ExitCode exit_code_;
};

} // namespace cypherprune

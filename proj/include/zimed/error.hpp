#ifndef ZIMED_ERROR_HPP
#define ZIMED_ERROR_HPP

#include <stdexcept>
#include <string>

namespace zimed {

// Broad error classes; the CLI maps each one to a distinct exit code.
enum class ErrorClass { Usage, Data, Convergence, IO };

class Error : public std::runtime_error {
public:
  Error(ErrorClass cls, std::string code, const std::string &what)
      : std::runtime_error(code + ": " + what), cls_(cls),
        code_(std::move(code)) {}

  ErrorClass error_class() const noexcept { return cls_; }
  // Short machine-readable name, e.g. "NonIntegerCount".
  const std::string &code() const noexcept { return code_; }

private:
  ErrorClass cls_;
  std::string code_;
};

struct UsageError : Error {
  UsageError(std::string code, const std::string &what)
      : Error(ErrorClass::Usage, std::move(code), what) {}
};

struct DataError : Error {
  DataError(std::string code, const std::string &what)
      : Error(ErrorClass::Data, std::move(code), what) {}
};

// Optimizer failures and numerical breakdowns (singular systems, underflow).
struct ConvergenceError : Error {
  ConvergenceError(std::string code, const std::string &what)
      : Error(ErrorClass::Convergence, std::move(code), what) {}
};

struct IOError : Error {
  IOError(std::string code, const std::string &what)
      : Error(ErrorClass::IO, std::move(code), what) {}
};

inline int exit_code(ErrorClass cls) {
  switch (cls) {
  case ErrorClass::Usage:
    return 2;
  case ErrorClass::Data:
    return 3;
  case ErrorClass::Convergence:
    return 4;
  case ErrorClass::IO:
    return 5;
  }
  return 1;
}

} // namespace zimed

#endif

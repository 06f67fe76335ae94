#pragma once

#include <stdexcept>
#include <string>

namespace chua {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the domain of an operation (non-finite voltage, bad parameter).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Two op-amp cells with the same knee cannot form a five-segment diode.
class DegenerateModelError : public Error {
 public:
  using Error::Error;
};

/// A state component left the physical range during integration.
class DivergenceError : public Error {
 public:
  DivergenceError(double time, const std::string& what)
      : Error(what + " (t = " + std::to_string(time) + " s)"), time_(time) {}

  [[nodiscard]] double time() const noexcept { return time_; }

 private:
  double time_;
};

/// Lyapunov estimate and maxima analysis disagree; a longer window is needed.
class InconclusiveError : public Error {
 public:
  using Error::Error;
};

/// Synthesized waveform has no audible content.
class DegenerateAudioError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace chua

#pragma once

#include <chrono>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hybridcast {

// Base class for every error the library reports.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file content. Carries the source name and 1-based line.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& message);

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// An iterative solver stopped before meeting its convergence criterion.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Training data dated after the edition it is used to predict.
class LeakageError : public Error {
 public:
  using Error::Error;
};

/// Calendar date with day resolution.
class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::sys_days days) : days_(days) {}
  Date(int year, unsigned month, unsigned day);

  /// Parses ISO "YYYY-MM-DD". Throws std::invalid_argument on bad input.
  static Date parse(std::string_view iso);
  static std::optional<Date> try_parse(std::string_view iso);

  std::chrono::sys_days days() const noexcept { return days_; }
  int year() const;
  std::string to_string() const;

  Date plus_days(long days) const { return Date(days_ + std::chrono::days(days)); }

  friend bool operator==(const Date&, const Date&) = default;
  friend auto operator<=>(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days days_{};
};

/// Signed number of days from `from` to `to`.
long days_between(Date from, Date to);

// Team, player, bookmaker and country identifiers are compared after trimming
// surrounding whitespace and ASCII case-folding.
std::string normalize_id(std::string_view raw);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

// 64-bit FNV-1a, used for config digests and artifact checksums.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

}  // namespace hybridcast

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sdcnpu
{

class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value; `field()` names the offending key path.
class ConfigError : public Error
{
  public:
    ConfigError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

  private:
    std::string field_;
};

/// Workload shapes that do not chain, or do not fit the model.
class ShapeError : public Error
{
  public:
    using Error::Error;
};

/// Argument outside the mathematical or enumerated domain of an operation.
class DomainError : public Error
{
  public:
    using Error::Error;
};

/// Problem size exceeds what an exact/exhaustive routine accepts.
class CapacityError : public Error
{
  public:
    using Error::Error;
};

/// Sampling plan inconsistent with the fault-site populations.
class PlanError : public Error
{
  public:
    using Error::Error;
};

/// Missing or inconsistent inputs (e.g. stats for a block are absent).
class InputError : public Error
{
  public:
    using Error::Error;
};

class IoError : public Error
{
  public:
    using Error::Error;
};

/// Record log contains a malformed line after a valid prefix.
class CorruptLogError : public Error
{
  public:
    CorruptLogError(const std::string& what, std::int64_t last_valid_run_id)
        : Error(what), last_valid_(last_valid_run_id) {}

    /// -1 when no record was valid.
    std::int64_t last_valid_run_id() const noexcept { return last_valid_; }

  private:
    std::int64_t last_valid_;
};

} // namespace sdcnpu
